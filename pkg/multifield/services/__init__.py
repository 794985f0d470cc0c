# multifield/services/__init__.py
