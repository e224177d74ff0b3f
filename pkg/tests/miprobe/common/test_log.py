import sys
import logging
import datetime
from unittest import TestCase, main
from unittest.mock import patch, Mock
from miprobe.common import log


class TestResolveLevel(TestCase):
    def test_numbers_and_names(self):
        self.assertEqual(log.resolve_level('10'), logging.DEBUG)
        self.assertEqual(log.resolve_level('warning'), logging.WARNING)
        self.assertEqual(log.resolve_level(' ERROR '), logging.ERROR)

    def test_fallback(self):
        self.assertEqual(log.resolve_level(None), log.LOG_LEVEL)
        self.assertEqual(log.resolve_level(''), log.LOG_LEVEL)
        self.assertEqual(log.resolve_level('chatty', default=logging.ERROR), logging.ERROR)


class TestGetLogger(TestCase):
    def _mocks(self, mock_stream_handler, mock_get_logger):
        handler, logger = Mock(), Mock()
        mock_stream_handler.return_value = handler
        mock_get_logger.return_value = logger
        return handler, logger

    @patch.dict('os.environ', {}, clear=True)
    @patch('logging.StreamHandler')
    @patch('logging.getLogger')
    @patch('logging.root.manager')
    def test_creates_stderr_logger(self, mock_manager, mock_get_logger, mock_stream_handler):
        mock_manager.loggerDict = {}
        handler, logger = self._mocks(mock_stream_handler, mock_get_logger)

        actual = log.get_logger()

        mock_stream_handler.assert_called_with(sys.stderr)
        handler.setLevel.assert_called_with(log.LOG_LEVEL)
        self.assertIsInstance(handler.setFormatter.call_args[0][0], log.LogFormatter)
        mock_get_logger.assert_called_with(log.LOGGER_NAME)
        logger.addHandler.assert_called_with(handler)
        self.assertFalse(logger.propagate)
        self.assertEqual(actual, logger)

    @patch('logging.StreamHandler')
    @patch('logging.getLogger')
    @patch('logging.root.manager')
    def test_reuses_existing(self, mock_manager, mock_get_logger, mock_stream_handler):
        mock_manager.loggerDict = {log.LOGGER_NAME: None}
        mock_get_logger.return_value = 'existing'

        self.assertEqual(log.get_logger(), 'existing')
        mock_stream_handler.assert_not_called()

    @patch.dict('os.environ', {log.LOG_LEVEL_ENV_VAR: 'debug'})
    @patch('logging.StreamHandler')
    @patch('logging.getLogger')
    @patch('logging.root.manager')
    def test_env_level(self, mock_manager, mock_get_logger, mock_stream_handler):
        mock_manager.loggerDict = {}
        handler, logger = self._mocks(mock_stream_handler, mock_get_logger)

        log.get_logger(log_level=logging.ERROR)

        handler.setLevel.assert_called_with(logging.DEBUG)
        logger.setLevel.assert_called_with(logging.DEBUG)


class TestLogFormatter(TestCase):
    def test_format_time(self):
        fmter = log.LogFormatter(log.LOG_FORMAT, datefmt=log.LOG_DATE_FORMAT)
        record = Mock()
        record.created = 1790000000.25

        actual = fmter.formatTime(record, datefmt=log.LOG_DATE_FORMAT)

        parsed = datetime.datetime.strptime(actual, log.LOG_DATE_FORMAT)
        self.assertEqual(parsed.timestamp(), record.created)

    def test_format_time_default(self):
        fmter = log.LogFormatter(log.LOG_FORMAT)
        record = Mock()
        record.created = 1790000000.0

        self.assertIn('.000000', fmter.formatTime(record))


if __name__ == '__main__':
    main()
