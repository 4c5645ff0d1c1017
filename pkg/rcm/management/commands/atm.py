from django.core.management.base import BaseCommand, CommandError

from rcm.atm import evaluate_atm, oracle_value
from rcm.cli import EXIT_BOTTOM, EXIT_USAGE, add_run_arguments, bottom_error, mismatch_error, run_config
from rcm.exceptions import DescriptorError, NonDeciderError
from rcm.machines import AlternatingTM, load_machine


class Command(BaseCommand):
    help = 'Evaluate an alternating Turing machine through call/return'

    def add_arguments(self, parser):
        parser.add_argument('mode', choices=['eval'])
        parser.add_argument('--machine', required=True, help='Fixture name or descriptor path')
        parser.add_argument('--input', default='')
        parser.add_argument('--budget', type=int, default=100_000, help='Configurations the evaluation may expand')
        parser.add_argument('--no-check', action='store_true', help='Skip the game-tree oracle comparison')
        add_run_arguments(parser)

    def handle(self, *args, **options):
        try:
            machine = load_machine(options['machine'])
        except DescriptorError as exc:
            raise CommandError(str(exc), returncode=EXIT_USAGE) from exc
        if not isinstance(machine, AlternatingTM):
            raise CommandError(f'{machine.name} is not an alternating machine', returncode=EXIT_USAGE)
        x = tuple(options['input'])

        try:
            evaluation = evaluate_atm(machine, x, options['budget'], run_config(options))
            expected = None if options['no_check'] else oracle_value(machine, x, options['budget'])
        except NonDeciderError as exc:
            raise CommandError(str(exc), returncode=EXIT_BOTTOM) from exc
        except DescriptorError as exc:
            raise CommandError(str(exc), returncode=EXIT_USAGE) from exc

        self.stderr.write(f'{evaluation.trace.record()} expansions={evaluation.expansions}')
        if evaluation.value is None:
            raise bottom_error(evaluation.result)
        self.stdout.write(str(evaluation.value))
        if expected is not None and evaluation.value != expected:
            raise mismatch_error(evaluation.value, expected)
