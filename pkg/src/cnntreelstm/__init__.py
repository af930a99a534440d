"""CNN-Tree-LSTM and CNN-LSTM sentence sentiment classifiers in numpy."""

__version__ = "0.1.0"
