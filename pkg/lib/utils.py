# standard library
from contextlib import contextmanager
import time

# local
from lib.env import WrongRuntimeEnvironmentVariable
from lib.errors import ConvergenceError, ValidationError, VerificationError



EXIT_MISSING_COMMAND = 1
EXIT_VALIDATION = 11
EXIT_CONVERGENCE = 12
EXIT_VERIFICATION = 13


def exit_code_for(e: Exception) -> int:
    """Maps an error onto the exit code class of the CLI"""
    if isinstance(e, (ValidationError, WrongRuntimeEnvironmentVariable)):
        return EXIT_VALIDATION
    if isinstance(e, ConvergenceError):
        return EXIT_CONVERGENCE
    if isinstance(e, VerificationError):
        return EXIT_VERIFICATION
    raise e


class Steps:
    """Numbered `=== Step i: ... ===` banners with the time each step took"""

    def __init__(self):
        self.i_step = 0

    @contextmanager
    def run(self, title: str):
        self.i_step += 1
        print(f'=== Step {self.i_step}: {title} ===')
        start_time = time.time()
        yield self.i_step
        print(f"  Step {self.i_step} finished in {(time.time() - start_time)} seconds\n")
