import csv
import io
import json
import threading
import urllib.error
import urllib.request

import pytest

from stylerag.app.cli import main
from stylerag.app.config import AppConfig, load_config
from stylerag.app.database import StyleDatabase
from stylerag.app.server import ServiceState, make_server
from stylerag.core import Script
from stylerag.ingestion import CorpusManifest
from stylerag.synthetic import bundled_path, make_synthetic_manifest, make_synthetic_script


@pytest.fixture(scope="module")
def sample_db(tmp_path_factory):
    out = tmp_path_factory.mktemp("db")
    code = main(["build-db", "--manifest", bundled_path("sample_manifest.json"), "--out", str(out), "--dim", "32"])
    assert code == 0
    return str(out)


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def test_build_db_writes_files(sample_db):
    db = StyleDatabase.open(sample_db)
    assert db.index.dim == 32 and db.index.count == len(db.store) > 0
    assert db.meta["record_count"] == db.index.count


def test_query_cli(sample_db, capsys):
    code, out, _ = run_cli(capsys, "query", "--index", sample_db, "--script", bundled_path("sample_script.json"),
                           "--position", "2")
    assert code == 0
    bundle = json.loads(out)
    assert len(bundle["prompts"]) == 3 and bundle["retrieved"] is True


def test_query_cli_is_deterministic(sample_db, capsys):
    args = ("query", "--index", sample_db, "--script", bundled_path("sample_script.json"), "--position", "5",
            "--k", "4", "--mode", "only-emotion")
    assert run_cli(capsys, *args)[1] == run_cli(capsys, *args)[1]


def test_query_cli_explicit_clip(sample_db, capsys):
    clip_id = StyleDatabase.open(sample_db).index.ids[0]
    code, out, _ = run_cli(capsys, "query", "--index", sample_db, "--script", bundled_path("sample_script.json"),
                           "--position", "0", "--explicit-clip", clip_id)
    bundle = json.loads(out)
    assert code == 0 and bundle["retrieved"] is False and bundle["prompts"][0]["clip"]["clip_id"] == clip_id


def test_query_cli_errors(sample_db, capsys):
    code, _, err = run_cli(capsys, "query", "--index", sample_db, "--script", bundled_path("sample_script.json"),
                           "--position", "999")
    assert code != 0 and json.loads(err.strip().splitlines()[-1])["error"]["code"] == "PositionOutOfRange"


def test_empty_manifest_fails(tmp_path, capsys):
    path = tmp_path / "empty.json"
    path.write_text(json.dumps({"version": 1, "entries": []}))
    code, _, err = run_cli(capsys, "build-db", "--manifest", str(path), "--out", str(tmp_path / "db"))
    assert code == 1 and "EmptyInput" in err


def test_eval_recall_csv(sample_db, tmp_path, capsys):
    out = tmp_path / "recall.csv"
    assert main(["eval-recall", "--index", sample_db, "--n-queries", "20", "--out", str(out)]) == 0
    rows = list(csv.DictReader(io.StringIO(out.read_text())))
    assert list(rows[0]) == ["probes", "k", "recall", "mean_latency"]
    recalls = [float(r["recall"]) for r in rows]
    assert recalls == sorted(recalls) and recalls[-1] == 1.0


def test_rebuild_index(sample_db, capsys, tmp_path):
    import shutil

    copy = tmp_path / "copy"
    shutil.copytree(sample_db, copy)
    code, out, _ = run_cli(capsys, "rebuild-index", "--index", str(copy), "--k-clusters", "3", "--seed", "9")
    assert code == 0 and json.loads(out)["n_clusters"] == 3
    assert StyleDatabase.open(str(copy)).index.n_clusters == 3


def test_config_precedence(tmp_path):
    cfg = tmp_path / "stylerag.conf"
    cfg.write_text("# defaults for the demo\nk = 7\ndim = 64\nlisten = 0.0.0.0:9000\n")
    env = {"STYLERAG_K": "5", "STYLERAG_SEED": "11"}
    merged = load_config({"k": 2, "probes": None}, env, str(cfg))
    assert (merged.k, merged.dim, merged.seed, merged.listen) == (2, 64, 11, "0.0.0.0:9000")
    assert load_config({}, env, str(cfg)).k == 5
    assert load_config({}, {}, str(cfg)).k == 7
    assert load_config({}, {}, None) == AppConfig()
    assert load_config({}, {"STYLERAG_CONFIG": str(cfg)}).dim == 64


def test_config_rejects_unknown_key(tmp_path):
    cfg = tmp_path / "bad.conf"
    cfg.write_text("colour = blue\n")
    with pytest.raises(ValueError):
        load_config({}, {}, str(cfg))


@pytest.fixture
def service(sample_db, tmp_path):
    scripts = tmp_path / "scripts"
    scripts.mkdir()
    (scripts / "s.json").write_text(open(bundled_path("sample_script.json")).read())
    state = ServiceState(AppConfig(scripts_dir=str(scripts)), sample_db)
    server = make_server(state, "127.0.0.1", 0)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    yield f"http://127.0.0.1:{server.server_address[1]}", state
    server.shutdown()
    server.server_close()


def http(url, body=None):
    data = None if body is None else (body if isinstance(body, bytes) else json.dumps(body).encode())
    req = urllib.request.Request(url, data=data, method="GET" if data is None else "POST")
    try:
        with urllib.request.urlopen(req, timeout=5) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as exc:
        return exc.code, json.loads(exc.read())


def test_service_health(service):
    url, state = service
    status, body = http(url + "/health")
    assert status == 200 and body == {"status": "ok", "record_count": state.db.index.count}


def test_service_retrieve_matches_cli(service, sample_db, capsys):
    url, _ = service
    script_id = Script.load(bundled_path("sample_script.json")).script_id
    status, body = http(url + "/v1/retrieve", {"script_id": script_id, "position": 2})
    assert status == 200
    _, out, _ = run_cli(capsys, "query", "--index", sample_db, "--script", bundled_path("sample_script.json"),
                        "--position", "2")
    assert body == json.loads(out)


def test_service_inline_script(service):
    url, _ = service
    body = {"script_id": "inline", "position": 1, "k": 2, "mode": "only_profile",
            "script": {"utterances": [{"speaker_id": "a", "text": "hi"}, {"speaker_id": "b", "text": "bye now"}]}}
    status, out = http(url + "/v1/retrieve", body)
    assert status == 200 and len(out["prompts"]) == 2


@pytest.mark.parametrize(
    "body, code",
    [
        (b"{not json", "MalformedBody"),
        ({"position": 1}, "MalformedBody"),
        ({"script_id": "nobody", "position": 0}, "UnknownScript"),
        ({"script_id": "demo-script", "position": 99}, "PositionOutOfRange"),
        ({"script_id": "demo-script", "position": 0, "mode": "loud"}, "MalformedBody"),
        ({"script_id": "demo-script", "position": 0, "explicit_clip_id": "missing"}, "UnknownClipId"),
    ],
)
def test_service_bad_requests(service, body, code):
    status, out = http(service[0] + "/v1/retrieve", body)
    assert status == 400 and out["error"]["code"] == code


def test_service_unknown_route(service):
    assert http(service[0] + "/nope")[0] == 404


def test_bundled_data_matches_generators():
    for name, made in [
        ("sample_manifest.json", make_synthetic_manifest(n_speakers=4, n_sources=2, segments_per_source=8, seed=3)),
        ("synthetic_manifest_30spk.json", make_synthetic_manifest()),
    ]:
        assert CorpusManifest.load(bundled_path(name)) == made
    assert Script.load(bundled_path("sample_script.json")) == make_synthetic_script()


def test_bundled_recall_at_default_probes(corpus_db, tmp_path):
    # 100 Gaussian queries (seed 0), k=3, default clusters ceil(sqrt(2469)) = 50
    out = tmp_path / "recall.csv"
    assert main(["eval-recall", "--index", corpus_db[0], "--probes", "8,50", "--out", str(out)]) == 0
    rows = {int(r["probes"]): float(r["recall"]) for r in csv.DictReader(io.StringIO(out.read_text()))}
    assert rows[50] == 1.0
    assert rows[8] == pytest.approx(0.727, abs=0.02)


def test_bundled_corpus_counts(corpus_db):
    counts = corpus_db[1].to_dict()["counts"]
    assert (counts["accepted"], counts["rejected"], counts["speakers"]) == (2469, 117, 30)
    assert corpus_db[2].n_clusters == 50
