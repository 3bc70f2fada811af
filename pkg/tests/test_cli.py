import io
import json
import shutil
import subprocess

import pytest

from corpus import OTHER_STATEMENTS, QUERY_CORPUS
from procgraph.cli import Session, main, repl, run_batch
from procgraph.datasets import MESSAGE_QUERY, banking_triples, evolution_triples, message_triples
from procgraph.graph import build_graph, dump_triples
from procgraph.registry import SnapshotCatalog

EXAMPLE1 = r"entity artifact \category='home-loan' AND \submission-branch='Sydney'"
EXAMPLE6 = r"metadata evolutionOf Adam_loan_document_v2 \what='lifecycle' \how='create'"


@pytest.fixture
def files(tmp_path):
    (tmp_path / "bank.tsv").write_text(dump_triples(banking_triples()))
    (tmp_path / "evo.tsv").write_text(dump_triples(evolution_triples()))
    return tmp_path


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def query_file(tmp_path, text, name="q.bp"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_entity_batch(files, capsys):
    code, out, err = run(["--graph", files / "bank.tsv", "query", query_file(files, EXAMPLE1)], capsys)
    assert code == 0
    assert out == "e\nHome-Loan-Document\n"


def test_syntax_error_exit_and_position(files, capsys):
    text = "entity artifact\n\nentity artifact \\a="
    code, out, err = run(["--graph", files / "bank.tsv", "query", query_file(files, text)], capsys)
    assert code == 1
    assert err.startswith("3:20: syntax error:")
    assert out.startswith("e\n")


def test_evaluation_error_reported_with_position(files, capsys):
    code, _, err = run(["--graph", files / "evo.tsv", "query", query_file(files, "entity version\nderivationOf act1\n")], capsys)
    assert code == 1
    assert err.startswith("2:1: NotAVersion:")


def test_example6_prints_two_paths(files, capsys):
    code, out, _ = run(["--graph", files / "evo.tsv", "query", query_file(files, EXAMPLE6)], capsys)
    assert code == 0
    lines = out.splitlines()
    assert lines[0] == "evolutionOf(Adam_loan_document_v2):"
    assert [line.split(":")[0].strip() for line in lines[1:]] == ["path#1", "path#2"]


def test_json_format(files, capsys):
    code, out, _ = run(["--graph", files / "bank.tsv", "--format", "json", "query", query_file(files, EXAMPLE1)], capsys)
    assert code == 0 and json.loads(out) == [{"e": "Home-Loan-Document"}]


def test_missing_graph_file(files, capsys):
    code, _, err = run(["--graph", files / "absent.tsv", "query", query_file(files, EXAMPLE1)], capsys)
    assert code == 2 and "cannot read" in err


def test_bad_flag_is_usage_error(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--format", "xml", "repl"])
    assert exc.value.code == 2


def session_for(triples, **kw):
    out, err = io.StringIO(), io.StringIO()
    return Session(SnapshotCatalog(build_graph(triples)), 1, out=out, err=err, **kw), out, err


def test_repl_explain_folders_quit():
    session, out, err = session_for(banking_triples() + message_triples(5))
    flat = " ".join(MESSAGE_QUERY.split())
    script = f"\\explain {flat}\ncorrelation x.type = y.type\n\\folders\n\\quit\nentity artifact\n"
    assert repl(session, io.StringIO(script)) == 0
    text = out.getvalue()
    assert "FILTER (?x = ?y && ?t > t1 && ?t < t2)" in text
    assert "type=artifact\t2" in text
    assert text.count("folder\tsize") == 2
    # nothing after \quit runs
    assert "Home-Loan-Document" not in text
    assert err.getvalue() == ""


def test_repl_multiline_statement():
    session, out, _ = session_for(banking_triples())
    script = "select ?x\nwhere { ?x @type ?t.\n FILTER (?t = 'staff') }\n"
    repl(session, io.StringIO(script))
    assert out.getvalue() == "x\nStaff\n"


def test_batch_and_repl_bytes_identical():
    statements = [
        EXAMPLE1,
        "correlation x.type = y.type",
        "\\folders",
        "relationship Adam (edge node)* edge Artifact",
        "relationship Adam (edge node)* assigned-to STAFF into folder staff",
        "entity nothing \\a='1'",
        "select ?s ?o where { ?s submitted ?o }",
        "\\format json",
        "select ?s ?o where { ?s submitted ?o }",
    ]
    batch, bout, berr = session_for(banking_triples())
    assert run_batch("\n\n".join(statements) + "\n", batch) == 0
    shell, rout, rerr = session_for(banking_triples())
    repl(shell, io.StringIO("\n".join(statements) + "\n"))
    assert bout.getvalue() == rout.getvalue()
    assert berr.getvalue() == rerr.getvalue() == ""


@pytest.mark.parametrize("text", QUERY_CORPUS + OTHER_STATEMENTS)
def test_exit_code_contract_over_corpus(text):
    session, out, err = session_for(banking_triples() + evolution_triples() + message_triples(20))
    assert run_batch(text, session) == 0, err.getvalue()
    session, out, err = session_for(banking_triples())
    assert run_batch(text + " )(", session) == 1
    assert ": syntax error:" in err.getvalue()


def test_paths_command_and_path_node():
    session, out, _ = session_for(banking_triples())
    run_batch("relationship Adam (edge node)* edge Artifact into found\n\\paths\n\\paths found\n", session)
    lines = out.getvalue().splitlines()
    assert lines[0] == "found:"
    assert "found\t2" in lines
    assert lines.count("  path#2: Adam ->(submitted)-> document ->(part-of)-> work-item ->(assigned-to)-> Staff ->(created)-> report") == 2


def test_catalog_persists_folders_and_snapshots(files, capsys, monkeypatch):
    catalog = files / "cat"
    monkeypatch.setenv("PROCGRAPH_CATALOG", str(catalog))
    code, _, _ = run(["--graph", files / "bank.tsv", "query", query_file(files, "correlation x.type = y.type")], capsys)
    assert code == 0
    code, out, _ = run(["query", query_file(files, "\\folders")], capsys)
    assert "type=artifact\t2" in out
    (files / "add.tsv").write_text("Manager\tsigned\tcontract\n")
    code, out, _ = run(["snapshot", "commit", "--add", files / "add.tsv"], capsys)
    assert (code, out) == (0, "2\n")
    code, out, _ = run(["snapshot", "list"], capsys)
    assert len(out.splitlines()) == 2
    code, out, _ = run(["query", "--snapshot", "1", query_file(files, "select ?x where { ?x signed ?y }")], capsys)
    assert out == "x\n"
    code, out, _ = run(["query", query_file(files, "select ?x where { ?x signed ?y }")], capsys)
    assert out == "x\nManager\n"


def test_ingest_log_with_time_order(files, capsys):
    log = files / "log.csv"
    log.write_text("event_id,timestamp,actor,activity\ne1,2017-12-01,Tim,A\ne2,2017-12-02,Tim,B\ne3,bad,Tim,C\n")
    code, out, err = run(["ingest", "log", log, "--time-order"], capsys)
    assert code == 0
    assert "e1\thappened-before\te2" in out.splitlines()
    assert "rejected=1" in err and "line 4" in err


@pytest.mark.skipif(shutil.which("procgraph") is None, reason="console script not installed")
def test_console_script(files):
    proc = subprocess.run(
        ["procgraph", "--graph", str(files / "bank.tsv"), "query", "-"],
        input="relationship Adam (edge node)* assigned-to Staff\n",
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0
    assert proc.stdout == "Adam ->(submitted)-> document ->(part-of)-> work-item ->(assigned-to)-> Staff\n"
