from datetime import datetime


# DataBorg Pattern
# https://www.oreilly.com/library/view/python-cookbook/0596001673/ch05s23.html
class RunBorg:
    """
    Shared state of one command line run. Every instance sees the same
    dict, so the conductor and the data writer agree on the session,
    experiment and certificate outcomes without passing them around.
    """
    __hivemind = None

    def __init__(self):
        if not RunBorg.__hivemind:
            RunBorg.__hivemind = self.__dict__

            self.session_date = datetime.now().strftime("%Y_%m_%d_%H%M")

            ######################
            # Current run
            ######################
            self.command: str = ""
            """Subcommand being executed"""

            self.experiment: str = ""
            """Output folder name under the output directory"""

            self.config: dict = {}
            """Echo of the resolved RunConfig"""

            ######################
            # Outcomes
            ######################
            self.certificates: dict = {}
            """name -> bool, filled as checks complete"""

            self.running: bool = False

        else:
            self.__dict__ = RunBorg.__hivemind

    def start(self, command: str, experiment: str, config: dict):
        self.command = command
        self.experiment = experiment
        self.config = config
        self.certificates = {}
        self.running = True

    def record(self, name: str, passed) -> bool:
        """None means reported but not pass/fail."""
        self.certificates[name] = None if passed is None else bool(passed)
        return self.certificates[name]

    @property
    def passed(self) -> bool:
        return all(value for value in self.certificates.values() if value is not None)

    def failures(self) -> list:
        return sorted(name for name, value in self.certificates.items() if value is False)
