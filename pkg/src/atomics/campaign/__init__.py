"""Multi-device orchestration: layouts, acquisitions, campaign runs."""

from .layout import ChipLayout, DeviceSite, load_layout, default_layout
from .acquire import AcquisitionSpec, DaqKind, DatasetRef, acquire
from .runner import CampaignReport, DeviceResult, Traversal, run_campaign

__all__ = [
    "AcquisitionSpec",
    "CampaignReport",
    "ChipLayout",
    "DaqKind",
    "DatasetRef",
    "DeviceResult",
    "DeviceSite",
    "Traversal",
    "acquire",
    "default_layout",
    "load_layout",
    "run_campaign",
]
