__version__ = "0.1.0"
__license__ = "MIT"
__doc__ = "BackEISNN spiking network training engine and command line tool"
