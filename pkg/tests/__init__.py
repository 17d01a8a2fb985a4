"""Unit test package for epimon."""
