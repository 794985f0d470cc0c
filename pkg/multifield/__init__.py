# multifield/__init__.py
# Version information
__version__ = '0.1.0'
