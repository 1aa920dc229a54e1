"""Tests for the EUREKA feature ranking toolkit."""
