import logging

from django.core.management.base import BaseCommand, CommandError

from rcm.backend import BackendConfig, LlmGenerator
from rcm.cli import EXIT_BACKEND, add_run_arguments, bottom_error, run_config, usage_error
from rcm.exceptions import BackendError
from rcm.runtime import run
from rcm.tokens import Tokens, return_block, tokenize

logger = logging.getLogger(__name__)


def echo_generator(view: Tokens) -> Tokens:
    """Answers every frame with itself"""
    return return_block(view)


class Command(BaseCommand):
    help = 'Run the context-stack machine from a prompt with a built-in or remote generator'

    def add_arguments(self, parser):
        parser.add_argument('--prompt', required=True)
        parser.add_argument('--generator', choices=['echo', 'llm'], default='echo')
        parser.add_argument('--root-problem', help='Root problem for the llm template (defaults to the prompt)')
        parser.add_argument('--prompt-prefixing', action='store_true')
        parser.add_argument('--question-preservation', action='store_true')
        parser.add_argument('--model')
        parser.add_argument('--base-url')
        parser.add_argument('--steps-csv', help='Write the per-step depth/ls/gs log here')
        add_run_arguments(parser)

    def handle(self, *args, **options):
        cfg = run_config(
            options,
            prompt_prefixing=options['prompt_prefixing'],
            question_preservation=options['question_preservation'],
            record_steps=bool(options['steps_csv'] or options['record_steps']) or None,
        )
        prompt = tokenize(options['prompt'])
        if not prompt:
            raise usage_error('--prompt must not be empty')

        if options['generator'] == 'llm':
            backend = BackendConfig.from_settings(model=options['model'], base_url=options['base_url'])
            generator = LlmGenerator(backend, options['root_problem'] or options['prompt'],
                                     prompt=prompt, prefixed=cfg.prompt_prefixing)
        else:
            generator = echo_generator

        try:
            result = run(prompt, generator, cfg)
        except BackendError as exc:
            raise CommandError(f'backend failure: {exc}', returncode=EXIT_BACKEND) from exc

        if options['steps_csv']:
            with open(options['steps_csv'], 'w', encoding='utf-8') as handle:
                handle.write(result.trace.step_csv())
        self.stderr.write(result.trace.record())
        if not result.is_answer:
            raise bottom_error(result)
        self.stdout.write(result.answer_text)
