#!/usr/bin/env python3
"""
Geometric Steering Lab - Main Application
Train a shape-sensitive teacher, then steer generators toward it without retraining them
"""

import logging
import os
import sys

from dotenv import load_dotenv

# Load environment variables
load_dotenv()

# Configure logging
LOG_FILE = os.getenv("STEERLAB_LOG_FILE", "steerlab.log")
os.makedirs(os.path.dirname(LOG_FILE) or ".", exist_ok=True)
logging.basicConfig(
    level=getattr(logging, os.getenv("STEERLAB_LOG_LEVEL", "INFO").upper(), logging.INFO),
    format='%(asctime)s - %(name)s - %(levelname)s - %(message)s',
    handlers=[
        logging.FileHandler(LOG_FILE),
        logging.StreamHandler()
    ]
)
logger = logging.getLogger(__name__)

from lab_cli.main import main  # noqa: E402

if __name__ == "__main__":
    sys.exit(main())
