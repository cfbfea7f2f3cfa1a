"""
Test suite for epiforecast
"""
