"""Fast frequency sweep of periodic acoustic gratings."""
