"""Dynamic data-center resizing under fast time-scale delay SLAs."""

__version__ = "0.1.0"
