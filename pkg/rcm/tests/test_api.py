import pytest
from django.urls import reverse
from rest_framework.test import APIClient

from rcm.models import BenchRow, BenchRun
from rcm.tests.conftest import FIXTURES
from rcm.views import reset_mock

FIVE_SCIENTISTS = (FIXTURES / "sat" / "five_scientists.cnf").read_text(encoding="utf-8")


@pytest.fixture
def client():
    return APIClient()


@pytest.fixture
def bench_run(db):
    run = BenchRun.objects.create(bands=["easy"], workers=2, variables=6, summary=[{"band": "easy"}])
    for i, verdict in enumerate(["No", "Yes"]):
        BenchRow.objects.create(
            run=run, instance_id=f"easy-{i:03d}", band="easy", verdict=verdict, oracle_verdict="No",
            trajectory_tokens=100, max_active_context=40, max_depth=3, steps=9, wall_time=0.1,
        )
    return run


@pytest.mark.django_db
class TestHealth:
    def test_health(self, client):
        response = client.get(reverse("rcm:health_check"))
        assert response.status_code == 200
        assert response.data["bench_runs"] == 0
        assert response.data["uptime_sec"] >= 0


@pytest.mark.django_db
class TestSolve:
    def test_solve(self, client):
        response = client.post(reverse("rcm:sat_solve"), {"dimacs": FIVE_SCIENTISTS}, format="json")
        assert response.status_code == 200
        assert response.data["verdict"] == "No"
        assert response.data["oracle_verdict"] == "No"
        assert response.data["outcome"] == "No"
        assert response.data["trace"]["max_depth"] == 2
        assert "steps" not in response.data

    def test_include_steps(self, client):
        response = client.post(reverse("rcm:sat_solve"), {"dimacs": FIVE_SCIENTISTS, "include_steps": True},
                               format="json")
        steps = response.data["steps"]
        assert [s["kind"] for s in steps] == ["call", "return", "call", "return", "return"]
        assert steps[-1]["emitted"].endswith("<return>No</return>")

    def test_step_limit(self, client):
        response = client.post(reverse("rcm:sat_solve"), {"dimacs": FIVE_SCIENTISTS, "max_steps": 2},
                               format="json")
        assert response.data["verdict"] is None
        assert response.data["outcome"] == "bottom:limit_exceeded:steps"

    @pytest.mark.parametrize("payload", [{}, {"dimacs": "p cnf 2 1\n1 2\n"}, {"dimacs": FIVE_SCIENTISTS, "max_steps": 0}])
    def test_invalid(self, client, payload):
        response = client.post(reverse("rcm:sat_solve"), payload, format="json")
        assert response.status_code == 400
        assert "error" in response.data


@pytest.mark.django_db
class TestBenchRuns:
    def test_list(self, client, bench_run):
        response = client.get(reverse("rcm:list_bench_runs"))
        assert response.status_code == 200
        assert response.data["count"] == 1
        assert response.data["results"][0]["instances"] == 2

    def test_detail(self, client, bench_run):
        response = client.get(reverse("rcm:get_bench_run", args=[bench_run.pk]))
        assert response.status_code == 200
        assert [row["instance_id"] for row in response.data["rows"]] == ["easy-000", "easy-001"]
        assert bench_run.accuracy == 0.5

    def test_missing(self, client):
        response = client.get(reverse("rcm:get_bench_run", args=[999]))
        assert response.status_code == 404


class TestMockEndpoint:
    url = "/api/mock/v1/chat/completions"

    @pytest.fixture(autouse=True)
    def fresh_mock(self):
        reset_mock()
        yield
        reset_mock()

    def post(self, client, model, key="test-key", user="task"):
        return client.post(
            self.url, {"model": model, "messages": [{"role": "user", "content": user}]},
            format="json", HTTP_AUTHORIZATION=f"Bearer {key}",
        )

    def test_echo_task(self, client):
        response = self.post(client, "echo-task", user="[Current Task]\nAlice=True")
        assert response.json()["choices"][0]["message"]["content"] == "<return>Alice=True</return>"

    def test_flaky_fails_twice(self, client):
        assert [self.post(client, "flaky-2").status_code for _ in range(3)] == [500, 500, 200]

    def test_wrong_key(self, client):
        assert self.post(client, "echo-return", key="nope").status_code == 401

    def test_unknown_model(self, client):
        assert self.post(client, "gpt-nothing").status_code == 404

    def test_bad_body(self, client):
        response = client.post(self.url, {"messages": []}, format="json", HTTP_AUTHORIZATION="Bearer test-key")
        assert response.status_code == 400

    def test_get_not_allowed(self, client):
        assert client.get(self.url).status_code == 405
