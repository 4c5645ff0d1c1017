import json
import logging
import threading
import time
from collections import defaultdict

from django.conf import settings
from django.http import JsonResponse
from django.views.decorators.csrf import csrf_exempt
from rest_framework import status
from rest_framework.decorators import api_view, permission_classes
from rest_framework.pagination import PageNumberPagination
from rest_framework.permissions import AllowAny
from rest_framework.response import Response

from .exceptions import FormulaTooLarge
from .models import BenchRun
from .sat import brute_force, default_config, parse_dimacs, solve
from .serializers import (
    BenchRunDetailSerializer, BenchRunSerializer, ResourceTraceSerializer, SolveRequestSerializer,
)
from .tokens import render_tokens

logger = logging.getLogger(__name__)

SYSTEM_START_TIME = time.time()


class BenchRunPagination(PageNumberPagination):
    page_size = 20
    page_size_query_param = 'page_size'
    max_page_size = 100


@api_view(['GET'])
@permission_classes([AllowAny])
def health_check(request):
    """Health check endpoint"""
    data = {
        "uptime_sec": int(time.time() - SYSTEM_START_TIME),
        "bench_runs": BenchRun.objects.count(),
    }
    return Response(data, status=status.HTTP_200_OK)


@api_view(['POST'])
@permission_classes([AllowAny])
def sat_solve(request):
    """Run the DPLL recursion on a DIMACS formula"""
    serializer = SolveRequestSerializer(data=request.data)
    if not serializer.is_valid():
        return Response({'error': serializer.errors}, status=status.HTTP_400_BAD_REQUEST)

    formula = parse_dimacs(serializer.validated_data['dimacs'])
    cfg = default_config(max_steps=serializer.validated_data.get('max_steps', settings.RCM_MAX_STEPS))
    include_steps = serializer.validated_data['include_steps']
    outcome = solve(formula, cfg, keep_events=include_steps)
    try:
        oracle = brute_force(formula).verdict
    except FormulaTooLarge:
        oracle = None

    data = {
        'verdict': outcome.verdict,
        'outcome': outcome.result.describe(),
        'oracle_verdict': oracle,
        'trace': ResourceTraceSerializer(outcome.trace).data,
    }
    if include_steps:
        data['steps'] = [
            {'step': e.step, 'depth': e.depth, 'kind': e.kind.value, 'ls': e.ls, 'gs': e.gs,
             'emitted': render_tokens(e.emitted)}
            for e in outcome.events
        ]
    return Response(data, status=status.HTTP_200_OK)


@api_view(['GET'])
@permission_classes([AllowAny])
def list_bench_runs(request):
    paginator = BenchRunPagination()
    page = paginator.paginate_queryset(BenchRun.objects.all(), request)
    return paginator.get_paginated_response(BenchRunSerializer(page, many=True).data)


@api_view(['GET'])
@permission_classes([AllowAny])
def get_bench_run(request, run_id):
    try:
        run = BenchRun.objects.prefetch_related('rows').get(pk=run_id)
    except BenchRun.DoesNotExist:
        return Response({'error': 'Bench run not found'}, status=status.HTTP_404_NOT_FOUND)
    return Response(BenchRunDetailSerializer(run).data, status=status.HTTP_200_OK)


# -- bundled OpenAI-compatible mock --------------------------------------------

# canned (content, finish_reason) per model name
MOCK_REPLIES = {
    'echo-return': ('<return>ok</return>', 'stop'),
    'stop-stripped': ('<return>ok', 'stop'),
    'no-block': ('still thinking about it', 'length'),
    'truncate': ('<call>sub</call> trailing text', 'stop'),
}
FLAKY_FAILURES = 2

_mock_attempts = defaultdict(int)
_mock_lock = threading.Lock()


def reset_mock():
    with _mock_lock:
        _mock_attempts.clear()


def _completion(model, content, finish_reason):
    return {
        'id': 'chatcmpl-mock',
        'object': 'chat.completion',
        'model': model,
        'choices': [{
            'index': 0,
            'message': {'role': 'assistant', 'content': content},
            'finish_reason': finish_reason,
        }],
    }


@csrf_exempt
def mock_chat_completions(request):
    """Deterministic stand-in for a chat-completions endpoint, driven by the model name"""
    if request.method != 'POST':
        return JsonResponse({'error': 'Method not allowed'}, status=405)
    if request.headers.get('Authorization') != f"Bearer {settings.RCM_MOCK_API_KEY}":
        return JsonResponse({'error': {'message': 'invalid api key'}}, status=401)
    try:
        body = json.loads(request.body)
        model = body['model']
        messages = body['messages']
    except (json.JSONDecodeError, KeyError):
        return JsonResponse({'error': {'message': 'invalid request body'}}, status=400)

    user = next((m.get('content', '') for m in messages if m.get('role') == 'user'), '')
    with _mock_lock:
        _mock_attempts[(model, user)] += 1
        attempt = _mock_attempts[(model, user)]
    logger.debug("Mock completion for model=%s attempt=%d", model, attempt)

    if model == 'always-500' or (model == 'flaky-2' and attempt <= FLAKY_FAILURES):
        return JsonResponse({'error': {'message': 'upstream failure'}}, status=500)
    if model == 'flaky-2':
        return JsonResponse(_completion(model, '<return>ok</return>', 'stop'))
    if model == 'malformed':
        return JsonResponse({'unexpected': True})
    if model == 'echo-task':
        task = user.rsplit('[Current Task]\n', 1)[-1]
        return JsonResponse(_completion(model, f'<return>{task}</return>', 'stop'))
    if model not in MOCK_REPLIES:
        return JsonResponse({'error': {'message': f'unknown model {model}'}}, status=404)
    return JsonResponse(_completion(model, *MOCK_REPLIES[model]))
