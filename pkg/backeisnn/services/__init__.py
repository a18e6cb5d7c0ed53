"""Training, evaluation and persistence services behind the commands."""
