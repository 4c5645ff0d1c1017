import logging

from django.core.exceptions import ImproperlyConfigured
from django.core.management.base import BaseCommand, CommandError

from rcm.cli import EXIT_BOTTOM, EXIT_USAGE, add_run_arguments, bottom_error, mismatch_error, run_config
from rcm.exceptions import DescriptorError, NonDeciderError
from rcm.machines import AlternatingTM, TuringMachine, Verdict, initial_configuration, load_machine, run_tm, win_value
from rcm.recursive_tm import RedisMemoStore, cost_report, decide, write_cost_report
from rcm.summarizer import DEFAULT_FACTOR, simulate, token_efficiency

logger = logging.getLogger(__name__)


class Command(BaseCommand):
    help = 'Decide a Turing machine input directly, recursively, or with depth-2 summarization'

    def add_arguments(self, parser):
        parser.add_argument('mode', choices=['direct', 'recursive', 'summarize', 'win'])
        parser.add_argument('--machine', required=True, help='Fixture name or descriptor path')
        parser.add_argument('--input', default='')
        parser.add_argument('--memo', action='store_true', help='Memoize function values (recursive mode)')
        parser.add_argument('--redis-memo', action='store_true', help='Share memoized values through Redis')
        parser.add_argument('--cost-report', metavar='PATH', help='Write measured invocation counts (recursive mode)')
        parser.add_argument('--cost-t-max', type=int, default=6)
        parser.add_argument('--N', dest='n', type=int, help='Summarization window (summarize mode)')
        parser.add_argument('--factor', type=int, default=DEFAULT_FACTOR)
        parser.add_argument('--budget', type=int, default=100_000)
        add_run_arguments(parser)

    def handle(self, *args, **options):
        try:
            machine = load_machine(options['machine'])
            x = tuple(options['input'])
            initial_configuration(machine, x)
        except DescriptorError as exc:
            raise CommandError(str(exc), returncode=EXIT_USAGE) from exc

        mode = options['mode']
        if mode == 'win':
            self.handle_win(machine, x, options)
            return
        if not isinstance(machine, TuringMachine):
            raise CommandError(f'{machine.name} is alternating; use "tm win" or "atm eval"', returncode=EXIT_USAGE)

        direct = run_tm(machine, x, options['max_steps'] or 100_000)
        if mode == 'direct':
            self.stderr.write(f'time={direct.time} space={direct.space}')
            if direct.verdict is Verdict.TIMEOUT:
                raise CommandError(f'{machine.name} did not halt within the step budget', returncode=EXIT_BOTTOM)
            self.stdout.write(direct.verdict.value)
            return

        cfg = run_config(options)
        if mode == 'recursive':
            store = None
            if options['redis_memo']:
                try:
                    store = RedisMemoStore(f'rcm:memo:{machine.name}:{options["input"]}')
                except ImproperlyConfigured as exc:
                    raise CommandError(str(exc), returncode=EXIT_USAGE) from exc
            outcome = decide(machine, x, memo=options['memo'], cfg=cfg, memo_store=store)
            self.stderr.write(f'{outcome.trace.record()} invocations={outcome.ledger.total}')
            if options['cost_report']:
                write_cost_report(cost_report(machine, x, options['cost_t_max']), options['cost_report'])
            verdict, result = outcome.verdict, outcome.result
        else:
            simulation = simulate(machine, x, options['n'], options['factor'], cfg)
            result, verdict = simulation.result, simulation.verdict
            efficiency = token_efficiency(result.trace, simulation.simulated_steps, simulation.n, simulation.factor)
            self.stderr.write(result.trace.record())
            self.stderr.write(
                f'N={simulation.n} steps={simulation.simulated_steps} summaries={simulation.summaries} '
                f'tokens={efficiency["total_tokens"]} bound={efficiency["bound"]} ratio={efficiency["ratio"]:.3f}'
            )

        if verdict is None:
            raise bottom_error(result)
        self.stdout.write(verdict.value)
        if direct.verdict is not Verdict.TIMEOUT and verdict is not direct.verdict:
            raise mismatch_error(verdict.value, direct.verdict.value)

    def handle_win(self, machine, x, options):
        if not isinstance(machine, AlternatingTM):
            raise CommandError(f'{machine.name} is deterministic; use "tm direct"', returncode=EXIT_USAGE)
        try:
            value = win_value(machine, initial_configuration(machine, x), options['budget'])
        except NonDeciderError as exc:
            raise CommandError(str(exc), returncode=EXIT_BOTTOM) from exc
        self.stdout.write(str(value))
