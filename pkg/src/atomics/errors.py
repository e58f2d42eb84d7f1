"""Exception hierarchy shared across the engine.

Every error the hardware layer, controller, monitor or campaign can raise
derives from AtomicsError so callers can catch the whole family at the
service boundary.
"""


class AtomicsError(Exception):
    """Base class for all engine errors."""


# -- hardware layer ---------------------------------------------------------

class LimitViolation(AtomicsError):
    """Move target outside the axis soft limits. No motion was commanded."""


class AxisBusy(AtomicsError):
    """A conflicting move is already pending on the same axis."""


class DriverFault(AtomicsError):
    """A driver failed. Retried once by the bench before escalating."""


class WrongRoute(AtomicsError):
    """Power meter read attempted while the switch routes light to the DAQ."""


class OutOfRange(AtomicsError):
    """Angle or setpoint outside its legal range."""


class CampaignActive(AtomicsError):
    """Driver rebinding rejected while a campaign is running."""


class UnknownDriver(AtomicsError):
    """No driver factory registered under the requested name."""


class ConfigError(AtomicsError):
    """Malformed configuration or bench topology. The engine refuses to start."""


# -- vision ------------------------------------------------------------------

class TemplateTooLarge(AtomicsError):
    """Template does not fit inside the frame."""


class Degenerate(AtomicsError):
    """Calibration correspondences are collinear or too few."""


class IllConditioned(AtomicsError):
    """Calibration solution condition number exceeds the safety bound."""


class Uncalibrated(AtomicsError):
    """No valid stage-to-pixel calibration for the current objective."""


class CameraOutOfScene(AtomicsError):
    """Camera encoder position lies outside the simulated scene bounds."""


# -- alignment controller ----------------------------------------------------

class IllegalTransition(AtomicsError):
    """Event not legal in the current coupling state. State is unchanged."""

    def __init__(self, state, event):
        super().__init__(f"event {event} illegal in state {state}")
        self.state = state
        self.event = event


class DetectionLost(AtomicsError):
    """Vision track miss count exceeded during coarse alignment."""


class CalibrationStale(AtomicsError):
    """Calibration is older than the configured maximum age."""


class KeepoutViolation(AtomicsError):
    """Requested contact plane is inconsistent with axis limits."""


class MeterFault(AtomicsError):
    """Power meter unavailable during search."""


class InvalidFit(AtomicsError):
    """Scan fit rejected: non-concave, extrapolated vertex, or poor r²."""


class Diverged(AtomicsError):
    """Fine alignment lost the peak: power fell >3 dB and fits failed twice."""


class FlatResponse(AtomicsError):
    """Polarization scan contrast below 1.05; device is insensitive."""


# -- monitor -----------------------------------------------------------------

class ReferenceUnset(AtomicsError):
    """CUSUM update attempted before a locked reference was set."""


class WindowTooShort(AtomicsError):
    """Stability check window shorter than the configured minimum."""


# -- campaign / service ------------------------------------------------------

class ParseError(AtomicsError):
    """Layout file could not be parsed; message carries the offending field."""


class ValidationError(AtomicsError):
    """Layout parsed but violates an invariant (duplicate ids, extent, ...)."""


class NotLocked(AtomicsError):
    """Acquisition requested outside the Locked state."""


class DaqFault(AtomicsError):
    """DAQ driver failure during acquisition."""


class IllegalInState(AtomicsError):
    """Operation not permitted in the current coupling state."""


class NoFrameYet(AtomicsError):
    """Frame requested before the camera produced one."""


class EngineDown(AtomicsError):
    """Command submitted while the engine is not running."""
