"""
Tests for logging setup
"""

import logging
import os

from RisAlign import logger


class TestSetupLogging:
    def test_daily_file(self, log_dir):
        path = logger.setup_logging("DEBUG", log_dir)
        assert path is not None
        assert os.path.dirname(path) == log_dir
        assert path.endswith(".log")
        logger.logger.info("trial chunk merged")
        for handler in logging.getLogger().handlers:
            handler.flush()
        with open(path, encoding="utf-8") as f:
            assert "[INFO] trial chunk merged" in f.read()

    def test_stderr_only(self, tmp_path):
        assert logger.setup_logging("INFO", str(tmp_path / "unused"), to_file=False) is None
        assert not (tmp_path / "unused").exists()

    def test_level(self, log_dir):
        logger.setup_logging("warning", log_dir)
        assert logger.logger.level == logging.WARNING
        logger.setup_logging("nonsense", log_dir)
        assert logger.logger.level == logging.INFO
