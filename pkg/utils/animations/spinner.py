"""A simple spinner module"""
import itertools
import sys
import threading
import time
from typing import Optional, TextIO


class Spinner:
    """Progress spinner for long CLI steps. Draws on stderr, and only when it is a terminal."""

    def __init__(self, message: str = "Working...", delay: float = 0.1, enabled: bool = True,
                 stream: Optional[TextIO] = None) -> None:
        """Initialize the spinner

        Args:
            message (str): The message to display.
            delay (float): The delay between each spinner update.
            enabled (bool): False keeps the spinner silent, e.g. under --quiet.
            stream (TextIO): Where to draw, stderr by default.
        """
        self.spinner = itertools.cycle(["-", "/", "|", "\\"])
        self.delay = delay
        self.message = message
        self.stream = stream if stream is not None else sys.stderr
        self.enabled = enabled and hasattr(self.stream, "isatty") and self.stream.isatty()
        self.running = False
        self.spinner_thread = None

    def _clear(self) -> None:
        self.stream.write(f"\r{' ' * (len(self.message) + 2)}\r")

    def spin(self) -> None:
        while self.running:
            self.stream.write(f"{next(self.spinner)} {self.message}\r")
            self.stream.flush()
            time.sleep(self.delay)
            self._clear()

    def __enter__(self):
        if self.enabled:
            self.running = True
            self.spinner_thread = threading.Thread(target=self.spin, daemon=True)
            self.spinner_thread.start()
        return self

    def __exit__(self, exc_type, exc_value, exc_traceback) -> None:
        self.running = False
        if self.spinner_thread is not None:
            self.spinner_thread.join()
            self.spinner_thread = None
            self._clear()
            self.stream.flush()

    def update_message(self, new_message: str) -> None:
        """Swap the message shown, e.g. to report the current round."""
        if self.enabled:
            self._clear()
            self.stream.flush()
        self.message = new_message
