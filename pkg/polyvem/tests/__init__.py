"""
tests/ — тести для polyvem
"""
