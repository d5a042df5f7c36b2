"""End-to-end smoke tests for the Python bindings and the CLI binary.

The CLI path arrives via the STRKIT_CLI environment variable; CLI tests are
skipped when it is absent so the module tests can run standalone.
"""

import math
import os
import subprocess

import pytest

import strkit

CLI = os.environ.get("STRKIT_CLI", "")


def test_tokenize_round_trip():
    tok = strkit.Tokenizer()
    text = "héllo wörld ☂\n\x00binary"
    tt = tok.tokenize(text)
    assert tok.detokenize(tt.token_ids) == text.encode("utf-8")
    assert tok.detokenize_text(tt.token_ids) == text
    assert len(tt) == len(text.encode("utf-8"))


def test_merges_and_alignment():
    tok = strkit.Tokenizer(merges=[(116, 104), (256, 101)])
    assert tok.vocab_size == 258
    tt = tok.tokenize("the thermos")
    assert 257 in tt.token_ids
    assert tok.detokenize_text(tt.token_ids) == "the thermos"
    span = tok.align_span(tt, strkit.CharSpan(0, 3))
    covered = tok.detokenize_text(tt.token_ids[span.start : span.end])
    assert "the" in covered


def test_render_and_markers():
    ex = strkit.RcExample(id="e", question="Why?", context="Because.", answers=["-"])
    qf = strkit.render(ex, strkit.PromptOrder.QUESTION_FIRST)
    assert qf.text == "Question: Why? Context: Because."
    cf = strkit.render(ex, strkit.PromptOrder.CONTEXT_FIRST)
    assert cf.text == "Context: Because. Question: Why?"
    star = strkit.find_builtin_marker("star")
    marked = strkit.apply_markers(qf, strkit.EmphasisTarget.QUESTION, star)
    assert marked.text == "Question: *Why?* Context: Because."
    assert strkit.closed_book_render(ex).text == "Question: Why?"
    assert len(strkit.builtin_markers()) == 4


def test_steer_attention_row_oracle():
    row, degenerate = strkit.steer_attention_row(
        [0.5, 0.3, 0.2], [True, False, False], 1e-3
    )
    assert not degenerate
    assert abs(row[0] - 0.5 / 0.5005) < 1e-6
    assert abs(row[1] - 0.0003 / 0.5005) < 1e-9
    assert abs(row[2] - 0.0002 / 0.5005) < 1e-9
    assert abs(sum(row) - 1.0) < 1e-6


def test_forward_shapes_and_determinism():
    cfg = strkit.ModelConfig()
    cfg.n_layers = 2
    cfg.n_heads = 2
    cfg.d_model = 16
    cfg.vocab_size = 64
    cfg.max_seq_len = 32
    cfg.seed = 5
    model = strkit.init_random(cfg)
    tokens = [1, 2, 3, 4, 5]
    out = strkit.forward(model, tokens, capture_attn=True)
    assert out["logits"].shape == (5, 64)
    assert out["attentions"].shape == (2, 2, 5, 5)
    assert out["degenerate_rows"] == 0
    again = strkit.forward(model, tokens)
    assert (out["logits"] == again["logits"]).all()
    steered = strkit.forward(model, tokens, heads=[(0, 1)], alpha=1e-3, segment=(1, 3))
    assert (steered["logits"] != out["logits"]).any()


def test_generate_and_logprobs():
    cfg = strkit.ModelConfig()
    cfg.n_layers = 1
    cfg.n_heads = 1
    cfg.d_model = 8
    cfg.vocab_size = 64
    cfg.max_seq_len = 16
    cfg.seed = 1
    model = strkit.init_random(cfg)
    generated = strkit.generate_greedy(model, [1, 2, 3], max_new=4)
    assert len(generated) == 4
    assert all(0 <= t < 64 for t in generated)
    lps = strkit.sequence_logprobs(model, [1, 2, 3, 4])
    assert len(lps) == 3
    assert all(lp < 0 for lp in lps)


def test_metrics():
    assert abs(strkit.perplexity([math.log(0.5), math.log(0.125)]) - 4.0) < 1e-12
    assert strkit.contains_accuracy(["Paris"], "in PARIS today")
    assert not strkit.contains_accuracy(["dog"], "cat")
    assert strkit.normalize_for_match("  Hello   WORLD ") == "hello world"


def test_topk_intersection():
    maps = [
        {(0, 0): 0.1, (0, 1): 0.9, (1, 0): 0.5, (1, 1): 0.2},
        {(0, 0): 0.2, (0, 1): 0.8, (1, 0): 0.1, (1, 1): 0.6},
    ]
    assert strkit.topk_intersection(maps, 1, 2, 2) == [(0, 1)]
    assert strkit.topk_intersection(maps, 4, 2, 2) == [
        (0, 0),
        (0, 1),
        (1, 0),
        (1, 1),
    ]


def test_errors_surface_as_exceptions():
    with pytest.raises(strkit.StrkitError):
        strkit.perplexity([])
    tok = strkit.Tokenizer()
    with pytest.raises(strkit.StrkitError):
        tok.detokenize([999])


def _write_corpus(path, n=3):
    lines = [
        '{"id": "t%d", "question": "Q%d?", "context": "a b", "answers": ["a"]}'
        % (i, i)
        for i in range(n)
    ]
    path.write_text("\n".join(lines) + "\n")


def _base_config(tmp_path, extra=""):
    data = tmp_path / "toy.jsonl"
    _write_corpus(data)
    cfg = tmp_path / "exp.cfg"
    cfg.write_text(
        "dataset = toy %s\n"
        "model.random.n_layers = 1\n"
        "model.random.n_heads = 1\n"
        "model.random.d_model = 8\n"
        "model.random.vocab_size = 256\n"
        "model.random.max_seq_len = 64\n"
        "model.random.seed = 3\n"
        "orders = question_first\n"
        "methods = ne\n"
        "decode.max_new = 4\n" % data + extra
    )
    return cfg


needs_cli = pytest.mark.skipif(not CLI, reason="STRKIT_CLI is not set")


@needs_cli
def test_cli_help_and_config_errors(tmp_path):
    assert subprocess.run([CLI, "--help"], capture_output=True).returncode == 0
    missing = subprocess.run(
        [CLI, "eval", "--config", str(tmp_path / "missing.cfg")],
        capture_output=True,
    )
    assert missing.returncode == 1
    bad = tmp_path / "bad.cfg"
    bad.write_text("this is not a config\n")
    assert (
        subprocess.run(
            [CLI, "eval", "--config", str(bad)], capture_output=True
        ).returncode
        == 1
    )


@needs_cli
def test_cli_eval_and_report(tmp_path):
    cfg = _base_config(tmp_path)
    out = tmp_path / "out"
    run = subprocess.run(
        [CLI, "eval", "--config", str(cfg), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert run.returncode == 0, run.stderr
    assert (out / "eval.csv").exists()
    assert (out / "eval_table.txt").exists()

    report = subprocess.run(
        [CLI, "report", "--config", str(cfg), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert report.returncode == 0, report.stderr
    assert "NE" in report.stdout


@needs_cli
def test_cli_runtime_failures_exit_two(tmp_path):
    # Parses cleanly, but the steering head file is missing at run time.
    cfg = _base_config(
        tmp_path,
        "methods = as\nas.targets = c\nas.heads_file = %s\n"
        % (tmp_path / "no_such_profile.json"),
    )
    run = subprocess.run(
        [CLI, "eval", "--config", str(cfg), "--out", str(tmp_path / "out")],
        capture_output=True,
    )
    assert run.returncode == 2

    # report before eval has nothing to read.
    cfg2 = _base_config(tmp_path)
    report = subprocess.run(
        [CLI, "report", "--config", str(cfg2), "--out", str(tmp_path / "empty")],
        capture_output=True,
    )
    assert report.returncode == 2


@needs_cli
def test_cli_partition_and_profile(tmp_path):
    cfg = _base_config(tmp_path, "profile.target = c\nk_grid = 1\n")
    out = tmp_path / "out"
    part = subprocess.run(
        [CLI, "partition", "--config", str(cfg), "--out", str(out)],
        capture_output=True,
        text=True,
    )
    assert part.returncode == 0, part.stderr
    assert (out / "partition.json").exists()
    assert (out / "knowledge.csv").exists()

    prof = subprocess.run(
        [CLI, "profile", "--config", str(cfg), "--out", str(out), "--threads", "2"],
        capture_output=True,
        text=True,
    )
    assert prof.returncode == 0, prof.stderr
    assert (out / "profile.json").exists()
