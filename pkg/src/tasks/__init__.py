# Task modules
from .sweep_tasks import run_sweep, split_grid
