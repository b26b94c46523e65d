"""
Resistive Network Solver Application
"""
