"""scribebench: build handwritten-OCR line datasets and evaluate engines."""

__version__ = "0.1.0"
