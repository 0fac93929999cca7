"""Heavy-rainfall forecasting from rain-gauge networks with a graph convolutional network."""

__version__ = "0.1.0"
