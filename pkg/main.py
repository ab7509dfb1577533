import argparse
import logging
import sys

import art

from modules.conductor import COMMANDS, Conductor
from modules.errors import ConfigurationError, ExitCode
from modules.run_config import RunConfig


class Main:
    """
    Command line front end of tfprop.

    Resolves the RunConfig (config.py defaults, --config JSON, --override
    pairs), hands the subcommand to the Conductor and maps the outcome to
    an exit code: 0 pass, 1 certificate failure, 2 configuration error.
    Defaults are to be modified in config.py.
    """
    def __init__(self, argv: list = None):
        self.args = self.parser().parse_args(argv)

        # Logging for all modules
        logging.basicConfig(level=logging.DEBUG if self.args.verbose else logging.INFO)

    @staticmethod
    def parser() -> argparse.ArgumentParser:
        parser = argparse.ArgumentParser(prog="tfprop",
                                         description="Time-frequency analysis of Schroedinger propagators")
        parser.add_argument("command", choices=COMMANDS, help="experiment to run")
        parser.add_argument("--config", help="JSON file overriding the config.py defaults")
        parser.add_argument("--out", help="output directory (default from config.py)")
        parser.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                            help="override one config value, may be repeated")
        parser.add_argument("--verbose", action="store_true", help="debug logging")
        parser.add_argument("--quiet", action="store_true", help="skip the banner")
        return parser

    def run(self) -> int:
        if not self.args.quiet:
            art.tprint("tfprop")
        try:
            run_config = RunConfig.load(self.args.config, self.args.override)
            return int(Conductor(run_config, self.args.command, self.args.out).run())
        except ConfigurationError as error:
            logging.error(f"configuration error: {error}")
            return int(ExitCode.CONFIGURATION_ERROR)


def main(argv: list = None) -> int:
    return Main(argv).run()


if __name__ == "__main__":
    sys.exit(main())
