# Copyright © 2024 The RUMBoost Contributors
#
# Released under the Simplified BSD License. See LICENSE for details.

import os

"""Defines various variables that are used internally for the application.

   Variables that are meant to be exposed to the user are in settings.json.
"""

# Application Info
name = "RUMBoost"
author = "The RUMBoost Contributors"
contact = author
version = "1.0.0"
license = "Simplified BSD License"

# Version of the model file and table layouts. Bump when either changes.
formatName = "rumboost-model"
formatVersion = 1

# Directory of Program
phome = os.path.dirname(os.path.realpath(__file__ + "/../.."))

# Files Directory
filesDirectory = phome + "/files"

# Set by --config
settingsPath = ""

# Set by --quiet
quiet = False

# Environment variable capping the threads that grow candidate trees
threadsVariable = "RUMBOOST_THREADS"

# Numerical constants
probabilityFloor = 1e-15
hessianFloor = 1e-6
derivativeThreshold = 1e-9
minimumGapFraction = 1e-9

# Exit codes
exitSuccess = 0
exitConfig = 2
exitData = 3
exitNumerical = 4

# Monotone directions as written in spec documents
increasing = "increasing"
decreasing = "decreasing"
unconstrained = "none"
directions = (increasing, decreasing, unconstrained)

# ANSI color codes for console messages
colors = {
    "red": 31,
    "green": 32,
    "yellow": 33,
    "purple": 34,
    "pink": 35,
    "cyan": 36,
}
