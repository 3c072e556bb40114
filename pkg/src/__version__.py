"""
Capture analysis - version information
"""

__version__ = "0.1.0"
__version_info__ = (0, 1, 0)

# Version history
# 0.1.0 - Initial release
#   - Logistic, tent and polynomial unimodal maps
#   - Stable orbit detection, saddle partners and capture intervals
#   - Extrema recursion and chord model of f^q
#   - Capture sets W_R and capture probabilities P_q
#   - Monte Carlo and grid oracles
#   - Command-line data export
