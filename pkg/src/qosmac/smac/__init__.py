"""S-MAC protocol substrate: frames, schedules, unit-disk channel, node state machine."""
