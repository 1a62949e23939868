# validators.py