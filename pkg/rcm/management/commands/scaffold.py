from django.core.management.base import BaseCommand, CommandError

from rcm.cli import EXIT_BOTTOM, EXIT_USAGE
from rcm.exceptions import DescriptorError, ScaffoldError
from rcm.scaffolds import EvalBudget, evaluate, load_system
from rcm.tokens import render_tokens, tokenize


class Command(BaseCommand):
    help = 'Evaluate a scaffold system from a YAML system file'

    def add_arguments(self, parser):
        parser.add_argument('mode', choices=['run'])
        parser.add_argument('--system', required=True, help='System file or fixture name')
        parser.add_argument('--entry', default='0', help='Scaffold index or name')
        parser.add_argument('--input', default='')
        parser.add_argument('--space', type=int, help='Per-invocation space bound L (default RCM_SCAFFOLD_SPACE)')
        parser.add_argument('--calls', type=int, help='Scaffold invocation budget (default RCM_SCAFFOLD_CALLS)')
        parser.add_argument('--depth', type=int, help='Nesting budget (default RCM_SCAFFOLD_DEPTH)')

    def handle(self, *args, **options):
        entry = options['entry']
        entry = int(entry) if entry.isdigit() else entry
        try:
            system = load_system(options['system'])
            budget = EvalBudget.from_settings(space=options['space'], calls=options['calls'], depth=options['depth'])
            result = evaluate(system, entry, tokenize(options['input']), budget)
        except (DescriptorError, ScaffoldError, ValueError) as exc:
            raise CommandError(str(exc), returncode=EXIT_USAGE) from exc

        self.stderr.write(
            f'calls={result.calls} max_depth={result.max_depth} max_space={result.max_space} '
            f'queries={dict(result.oracle_queries)}'
        )
        if not result.defined:
            raise CommandError(f'evaluation undefined: {result.bottom.value}', returncode=EXIT_BOTTOM)
        self.stdout.write(render_tokens(result.output))
