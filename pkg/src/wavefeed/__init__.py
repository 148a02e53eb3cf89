"""Wave-measurement feedforward control for floating offshore wind turbines."""

__version__ = "0.1.0"
