"""Exposure analysis for CMake projects.

Which deliverables does a changed file reach, and under which build-time
configuration settings?
"""

__version__ = "0.1.0"
