# Shared state, configuration, pipeline workflow and evaluation
