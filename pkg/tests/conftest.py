"""Shared test configuration and fixtures."""

import os
import sys
from unittest.mock import MagicMock

import pytest

# Project root on the path so tests can import services and commands
sys.path.insert(0, os.path.abspath(os.path.join(os.path.dirname(__file__), '..')))


@pytest.fixture
def chat_completion():
    """Factory for mock requests.post responses carrying one chat completion."""
    def make(content):
        response = MagicMock()
        response.json.return_value = {'choices': [{'message': {'content': content}}]}
        response.raise_for_status.return_value = None
        return response
    return make
