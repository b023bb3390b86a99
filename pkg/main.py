# main.py
# Entry point for the qfe command-line tool.
import logging
import sys

import config
import cli

logger = logging.getLogger("qfe")


def run() -> int:
    # Wrap in a try-except to report any unhandled exception before exiting.
    try:
        return cli.main()
    except KeyboardInterrupt:
        logger.error("[FATAL] interrupted")
        return config.EXIT_FATAL
    except Exception as e:
        logger.exception("[FATAL] unexpected error: %s", e)
        return config.EXIT_FATAL


if __name__ == "__main__":
    sys.exit(run())
