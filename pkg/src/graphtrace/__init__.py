"""In-context graph tracing toolkit."""
