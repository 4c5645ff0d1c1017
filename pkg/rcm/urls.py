from django.urls import path
from . import views

app_name = 'rcm'

urlpatterns = [
    path('health/', views.health_check, name='health_check'),
    path('sat/solve/', views.sat_solve, name='sat_solve'),
    path('bench/runs/', views.list_bench_runs, name='list_bench_runs'),
    path('bench/runs/<int:run_id>/', views.get_bench_run, name='get_bench_run'),
    path('mock/v1/chat/completions', views.mock_chat_completions, name='mock_chat_completions'),
]
