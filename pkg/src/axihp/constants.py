"""Physical constants (SI)."""

import math

MU0 = 4e-7 * math.pi  # H/m
EPS0 = 8.8541878128e-12  # F/m
TWO_PI = 2.0 * math.pi
