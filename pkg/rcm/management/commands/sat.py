import logging
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from django.conf import settings
from django.core.management.base import BaseCommand, CommandError
from django.db import transaction

from rcm.cli import EXIT_MISMATCH, EXIT_USAGE, add_run_arguments, bottom_error, mismatch_error, run_config
from rcm.exceptions import DimacsError, FormulaTooLarge
from rcm.models import BenchRow as BenchRowModel
from rcm.models import BenchRun
from rcm.reporting import BenchRow, report, row_dict, summarize
from rcm.sat import (
    BANDS, band_of, brute_force, export_jsonl, gen_traces, parse_dimacs,
    random_3cnf, render_problem, replay, solve, training_eligible,
)
from rcm.serializers import TraceSampleSerializer

logger = logging.getLogger(__name__)

FIXTURE_DIR = Path(__file__).resolve().parents[2] / 'fixtures' / 'sat'


def load_formula(path_or_name):
    path = Path(path_or_name)
    if not path.exists():
        path = FIXTURE_DIR / f'{path_or_name}.cnf'
    try:
        return parse_dimacs(path.read_text(encoding='utf-8'))
    except FileNotFoundError:
        raise CommandError(f'no DIMACS file at {path_or_name!r}', returncode=EXIT_USAGE) from None
    except DimacsError as exc:
        raise CommandError(f'{path}: {exc}', returncode=EXIT_USAGE) from exc


def oracle_verdict(formula):
    try:
        return brute_force(formula).verdict
    except FormulaTooLarge:
        return ''


def bench_instance(instance_id, formula, cfg):
    started = time.perf_counter()
    outcome = solve(formula, cfg)
    wall_time = time.perf_counter() - started
    trace = outcome.trace
    return BenchRow(
        instance_id=instance_id,
        band=band_of(formula.m) or 'other',
        verdict=outcome.verdict or outcome.result.describe(),
        oracle_verdict=oracle_verdict(formula),
        trajectory_tokens=trace.total_tokens_emitted,
        max_active_context=trace.max_local_space,
        max_depth=trace.max_depth,
        steps=trace.total_steps,
        wall_time=round(wall_time, 6),
    )


class Command(BaseCommand):
    help = 'Solve CNF formulas with the recursive DPLL policy, export traces, or benchmark bands'

    def add_arguments(self, parser):
        parser.add_argument('mode', choices=['solve', 'gen-traces', 'bench'])
        parser.add_argument('--dimacs', help='DIMACS file or fixture name (solve, gen-traces)')
        parser.add_argument('--out', help='JSONL destination (gen-traces)')
        parser.add_argument('--root-problem', help='File holding the root problem narrative (gen-traces)')
        parser.add_argument('--noun', default='person', help='Entity noun used in the generated narrative')
        parser.add_argument('--allow-large', action='store_true',
                            help='Export traces for formulas outside the training filter')
        parser.add_argument('--dir', help='Directory of .cnf instances (bench)')
        parser.add_argument('--bands', nargs='+', choices=[name for name, _, _ in BANDS], default=['easy', 'medium'])
        parser.add_argument('--per-band', type=int, default=20)
        parser.add_argument('--variables', type=int, default=10)
        parser.add_argument('--seed', type=int, default=0)
        parser.add_argument('--workers', type=int)
        parser.add_argument('--report', help='CSV destination for the per-instance rows (bench)')
        parser.add_argument('--save', action='store_true', help='Persist the benchmark run')
        parser.add_argument('--no-check', action='store_true', help='Skip the brute-force comparison (solve)')
        add_run_arguments(parser)

    def handle(self, *args, **options):
        cfg = run_config(options, prompt_prefixing=True, question_preservation=True)
        mode = options['mode']
        if mode == 'bench':
            self.handle_bench(cfg, options)
            return
        if not options['dimacs']:
            raise CommandError(f'sat {mode} needs --dimacs', returncode=EXIT_USAGE)
        formula = load_formula(options['dimacs'])
        if mode == 'solve':
            self.handle_solve(formula, cfg, options)
        else:
            self.handle_gen_traces(formula, cfg, options)

    def handle_solve(self, formula, cfg, options):
        outcome = solve(formula, cfg)
        self.stderr.write(outcome.trace.record())
        if outcome.verdict is None:
            raise bottom_error(outcome.result)
        self.stdout.write(outcome.verdict)
        if not options['no_check']:
            expected = oracle_verdict(formula)
            if expected and expected != outcome.verdict:
                raise mismatch_error(outcome.verdict, expected)

    def handle_gen_traces(self, formula, cfg, options):
        if not options['out']:
            raise CommandError('sat gen-traces needs --out', returncode=EXIT_USAGE)
        if not options['allow_large'] and not training_eligible(formula):
            raise CommandError(
                f'{formula.n} variables / {formula.m} clauses is outside the training filter; '
                'pass --allow-large to export anyway', returncode=EXIT_USAGE)
        if options['root_problem']:
            root_problem = Path(options['root_problem']).read_text(encoding='utf-8').rstrip('\n')
        else:
            root_problem = render_problem(formula, options['noun'])

        samples, outcome = gen_traces(formula, root_problem, cfg)
        if outcome.verdict is None:
            raise bottom_error(outcome.result)
        serializer = TraceSampleSerializer(data=[s.as_dict() for s in samples], many=True)
        if not serializer.is_valid():
            raise CommandError(f'generated samples failed validation: {serializer.errors}', returncode=EXIT_MISMATCH)
        replayed = replay(samples, cfg)
        if replayed.answer_text != outcome.verdict:
            raise mismatch_error(replayed.describe(), outcome.verdict)

        count = export_jsonl(samples, options['out'])
        self.stderr.write(f'{count} samples written to {options["out"]}')
        self.stdout.write(outcome.verdict)

    def instances(self, options):
        if options['dir']:
            paths = sorted(Path(options['dir']).glob('*.cnf'))
            if not paths:
                raise CommandError(f'no .cnf files in {options["dir"]}', returncode=EXIT_USAGE)
            return [(path.stem, load_formula(path)) for path in paths]
        bounds = {name: (low, high) for name, low, high in BANDS}
        instances = []
        for band in options['bands']:
            low, high = bounds[band]
            for i in range(options['per_band']):
                seed = options['seed'] + i
                m = low + (seed % (high - low + 1))
                instances.append((f'{band}-{i:03d}', random_3cnf(options['variables'], m, seed)))
        return instances

    def handle_bench(self, cfg, options):
        instances = self.instances(options)
        workers = options['workers'] or settings.RCM_BENCH_WORKERS
        if workers < 1:
            raise CommandError('--workers must be positive', returncode=EXIT_USAGE)
        logger.info('Benchmarking %d instances on %d workers', len(instances), workers)

        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(lambda item: bench_instance(item[0], item[1], cfg), instances))

        table, summary = report(rows)
        if options['report']:
            Path(options['report']).write_text(table, encoding='utf-8')
        else:
            self.stdout.write(table, ending='')
        self.stdout.write(summary, ending='')

        if options['save']:
            with transaction.atomic():
                run = BenchRun.objects.create(
                    bands=sorted({row.band for row in rows}),
                    workers=workers,
                    variables=max(formula.n for _, formula in instances),
                    summary=summarize(rows),
                )
                BenchRowModel.objects.bulk_create(BenchRowModel(run=run, **row_dict(row)) for row in rows)
            self.stderr.write(f'saved bench run {run.pk}')

        disagreements = [row.instance_id for row in rows if row.oracle_verdict and not row.agrees]
        if disagreements:
            raise mismatch_error(f'{len(disagreements)} wrong verdicts ({", ".join(disagreements[:5])})',
                                 'oracle agreement')
