"""CLI: subcommands, exit codes, determinism, config precedence."""

import json
import math
import subprocess
import sys

import pytest

from contention.cli import main

EX_DATA = 2
EX_USAGE = 64


def run_cli(argv, capsys):
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return str(path)


@pytest.fixture
def poll_csv(tmp_path):
    return write(tmp_path, "poll.csv",
                 "topic,stance,count\n"
                 "evolution,evolved,98\n"
                 "evolution,present_form,2\n"
                 "evolution,__none__,0\n")


@pytest.fixture
def brexit_votes_csv(tmp_path):
    return write(tmp_path, "brexit.csv",
                 "region,option,count\n"
                 "gibraltar,leave,823\n"
                 "gibraltar,remain,19322\n"
                 "dover,leave,40410\n"
                 "dover,remain,24500\n")


@pytest.fixture
def us_votes_csv(tmp_path):
    return write(tmp_path, "us.csv",
                 "region,option,count\n"
                 "us,clinton,65853514\n"
                 "us,trump,62984828\n"
                 "us,__none__,7830934\n"
                 "us,__eligible__,230585915\n")


BREXIT_LEXICON = {
    "topic": "brexit",
    "stances": [
        {"id": "leave", "label": "Leave EU", "hashtags": ["voteleave", "leaveeu"]},
        {"id": "remain", "label": "Remain EU", "hashtags": ["voteremain", "strongerin"]},
    ],
}


def tweet_line(i, ts, user, tags):
    return json.dumps({"id": str(i), "ts": ts, "user": user, "hashtags": tags})


@pytest.fixture
def tweet_fixture(tmp_path):
    """Three days with hand-computed contention values."""
    lines = []
    n = 0
    # day 1: 3 leave, 1 remain, 1 untagged; total 10
    for _ in range(3):
        lines.append(tweet_line(n := n + 1, "2016-06-21T08:00:00Z", f"u{n}", ["voteleave"]))
    lines.append(tweet_line(n := n + 1, "2016-06-21T09:00:00Z", f"u{n}", ["strongerin"]))
    lines.append(tweet_line(n := n + 1, "2016-06-21T10:00:00Z", f"u{n}", ["catsofsocialmedia"]))
    # day 2: 2 leave, 2 remain; total 8
    for _ in range(2):
        lines.append(tweet_line(n := n + 1, "2016-06-22T08:00:00Z", f"u{n}", ["leaveeu"]))
    for _ in range(2):
        lines.append(tweet_line(n := n + 1, "2016-06-22T09:00:00Z", f"u{n}", ["voteremain"]))
    # day 3: nothing tagged; total 5 comes from the totals file only
    stream = write(tmp_path, "stream.jsonl", "\n".join(lines) + "\n")
    lexicon = write(tmp_path, "lexicon.json", json.dumps(BREXIT_LEXICON))
    totals = write(tmp_path, "totals.csv",
                   "date,total\n2016-06-21,10\n2016-06-22,8\n2016-06-23,5\n")
    return stream, lexicon, totals


EXPECTED_TIMESERIES = (
    "date,n_all,n_stanced,k,raw_all,norm_all,raw_stanced,norm_stanced\n"
    "2016-06-21,10,4,2,0.060000,0.120000,0.375000,0.750000\n"
    "2016-06-22,8,4,2,0.125000,0.250000,0.500000,1.000000\n"
    "2016-06-23,5,0,2,0.000000,0.000000,,\n"
)


class TestPollCommand:
    def test_table_at_display_precision(self, poll_csv, capsys):
        code, out, _ = run_cli(["poll", poll_csv, "--precision", "2"], capsys)
        assert code == 0
        assert out == "topic,n,k,raw,normalized\nevolution,100,2,0.04,0.08\n"

    def test_full_precision_default(self, poll_csv, capsys):
        code, out, _ = run_cli(["poll", poll_csv], capsys)
        assert code == 0
        assert "0.078400" in out

    def test_json_mode(self, poll_csv, capsys):
        code, out, _ = run_cli(["poll", poll_csv, "--json"], capsys)
        assert code == 0
        record = json.loads(out.strip())
        assert record["topic"] == "evolution"
        assert record["normalized"] == 0.0784

    def test_out_file(self, poll_csv, tmp_path, capsys):
        target = tmp_path / "out.csv"
        code, out, _ = run_cli(["poll", poll_csv, "--out", str(target)], capsys)
        assert code == 0 and out == ""
        assert "evolution" in target.read_text()

    def test_empty_input_is_data_error(self, tmp_path, capsys):
        empty = write(tmp_path, "empty.csv", "topic,stance,count\n")
        code, _, err = run_cli(["poll", empty], capsys)
        assert code == EX_DATA
        record = json.loads(err.strip())
        assert record["error"] == "EmptyInput"

    def test_missing_file_is_data_error(self, capsys):
        code, _, err = run_cli(["poll", "/nonexistent.csv"], capsys)
        assert code == EX_DATA

    def test_sampled_estimator_deterministic(self, poll_csv, capsys):
        argv = ["poll", poll_csv, "--samples", "20000", "--seed", "9"]
        code_a, out_a, _ = run_cli(argv, capsys)
        code_b, out_b, _ = run_cli(argv, capsys)
        assert code_a == code_b == 0
        assert out_a == out_b
        normalized = float(out_a.strip().splitlines()[1].split(",")[-1])
        assert math.isclose(normalized, 0.0784, abs_tol=0.02)

    def test_brexit_national_fixture(self, tmp_path, capsys):
        path = write(tmp_path, "brexit.csv",
                     "topic,stance,count\nbrexit,leave,17410742\nbrexit,remain,16141241\n")
        code, out, _ = run_cli(["poll", path, "--precision", "2"], capsys)
        assert code == 0
        assert out.strip().splitlines()[1].endswith("1.00")


class TestVotesCommand:
    def test_brexit_districts(self, brexit_votes_csv, capsys):
        code, out, _ = run_cli(["votes", brexit_votes_csv, "--precision", "2"], capsys)
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "region,n,k,raw,normalized"
        rows = {line.split(",")[0]: line.split(",") for line in lines[1:]}
        assert rows["gibraltar"][4] == "0.16"
        assert set(rows) == {"__all__", "dover", "gibraltar"}

    def test_turnout_eligible(self, us_votes_csv, capsys):
        code, out, _ = run_cli(
            ["votes", us_votes_csv, "--turnout", "eligible", "--precision", "2"], capsys
        )
        assert code == 0
        rows = {line.split(",")[0]: line.split(",") for line in out.strip().splitlines()[1:]}
        assert rows["us"][4] == "0.31"

    def test_turnout_ballots_gives_two_candidate_value(self, us_votes_csv, capsys):
        code, out, _ = run_cli(["votes", us_votes_csv, "--precision", "2"], capsys)
        assert code == 0
        rows = {line.split(",")[0]: line.split(",") for line in out.strip().splitlines()[1:]}
        assert rows["us"][4] == "0.89"

    def test_unknown_flag_is_usage_error(self, brexit_votes_csv, capsys):
        code, _, _ = run_cli(["votes", brexit_votes_csv, "--definitely-not-a-flag"], capsys)
        assert code == EX_USAGE


class TestTweetsCommand:
    def test_timeseries_matches_hand_computation(self, tweet_fixture, capsys):
        stream, lexicon, totals = tweet_fixture
        code, out, err = run_cli(
            ["tweets", stream, "--lexicon", lexicon, "--totals", totals], capsys
        )
        assert code == 0
        assert out == EXPECTED_TIMESERIES
        assert "# tweets: 9 parsed, 0 parse errors" in err
        assert "leave=5" in err and "remain=3" in err

    def test_byte_identical_across_runs_and_threads(self, tweet_fixture, capsys):
        stream, lexicon, totals = tweet_fixture
        outputs = []
        for threads in ("1", "2", "4"):
            for _ in range(2):
                code, out, _ = run_cli(
                    ["tweets", stream, "--lexicon", lexicon, "--totals", totals,
                     "--threads", threads],
                    capsys,
                )
                assert code == 0
                outputs.append(out)
        assert len(set(outputs)) == 1

    def test_json_mode_uses_nulls_for_absent_values(self, tweet_fixture, capsys):
        stream, lexicon, totals = tweet_fixture
        code, out, _ = run_cli(
            ["tweets", stream, "--lexicon", lexicon, "--totals", totals, "--json"], capsys
        )
        assert code == 0
        last = json.loads(out.strip().splitlines()[-1])
        assert last["date"] == "2016-06-23"
        assert last["n_all"] == 5 and last["norm_all"] == 0.0
        assert last["raw_stanced"] is None and last["norm_stanced"] is None

    def test_no_totals_blanks_all_variant(self, tweet_fixture, capsys):
        stream, lexicon, _ = tweet_fixture
        code, out, _ = run_cli(["tweets", stream, "--lexicon", lexicon], capsys)
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[1].startswith("2016-06-21,,4,2,,,")

    def test_no_matches_yields_zero_or_absent(self, tmp_path, capsys):
        stream = write(tmp_path, "s.jsonl",
                       tweet_line(1, "2016-06-21T08:00:00Z", "u1", ["unrelated"]) + "\n")
        lexicon = write(tmp_path, "lex.json", json.dumps(BREXIT_LEXICON))
        totals = write(tmp_path, "t.csv", "date,total\n2016-06-21,1\n")
        code, out, _ = run_cli(
            ["tweets", stream, "--lexicon", lexicon, "--totals", totals], capsys
        )
        assert code == 0
        assert out.strip().splitlines()[1] == "2016-06-21,1,0,2,0.000000,0.000000,,"

    def test_by_user_excludes_conflicted_user(self, tmp_path, capsys):
        lines = [
            tweet_line(1, "2016-06-21T08:00:00Z", "fence-sitter", ["voteleave"]),
            tweet_line(2, "2016-06-21T09:00:00Z", "fence-sitter", ["voteremain"]),
            tweet_line(3, "2016-06-21T10:00:00Z", "loyal", ["voteleave"]),
            tweet_line(4, "2016-06-21T11:00:00Z", "loyal", ["voteleave"]),
        ]
        stream = write(tmp_path, "s.jsonl", "\n".join(lines) + "\n")
        lexicon = write(tmp_path, "lex.json", json.dumps(BREXIT_LEXICON))
        code, out, _ = run_cli(
            ["tweets", stream, "--lexicon", lexicon, "--by-user"], capsys
        )
        assert code == 0
        # only "loyal" counts, once, despite two tweets
        assert out.strip().splitlines()[1].split(",")[2] == "1"

    def test_error_budget_exceeded(self, tmp_path, capsys):
        lines = [tweet_line(1, "2016-06-21T08:00:00Z", "u", ["voteleave"]), "{broken"]
        stream = write(tmp_path, "s.jsonl", "\n".join(lines) + "\n")
        lexicon = write(tmp_path, "lex.json", json.dumps(BREXIT_LEXICON))
        code, _, err = run_cli(["tweets", stream, "--lexicon", lexicon], capsys)
        assert code == EX_DATA
        assert json.loads(err.strip().splitlines()[-1])["error"] == "ErrorBudgetExceeded"

    def test_missing_lexicon_is_usage_error(self, tweet_fixture, capsys):
        stream, _, _ = tweet_fixture
        code, _, _ = run_cli(["tweets", stream], capsys)
        assert code == EX_USAGE

    def test_empty_stream_without_totals_is_data_error(self, tmp_path, capsys):
        stream = write(tmp_path, "empty.jsonl", "")
        lexicon = write(tmp_path, "lex.json", json.dumps(BREXIT_LEXICON))
        code, _, err = run_cli(["tweets", stream, "--lexicon", lexicon], capsys)
        assert code == EX_DATA
        assert json.loads(err.strip().splitlines()[-1])["error"] == "EmptyInput"


class TestQuadrantCommand:
    @pytest.fixture
    def quadrant_csv(self, tmp_path):
        return write(tmp_path, "quad.csv",
                     "topic,stance,count,importance\n"
                     "national-parks,yes,930116,6.1\n"
                     "national-parks,no,69884,6.1\n")

    def test_reported_contention(self, quadrant_csv, capsys):
        code, out, _ = run_cli(
            ["quadrant", quadrant_csv, "--importance-scale", "0", "10",
             "--precision", "2"],
            capsys,
        )
        assert code == 0
        assert out == "topic,contention,importance\nnational-parks,0.26,0.61\n"

    def test_single_topic_single_row(self, quadrant_csv, capsys):
        code, out, _ = run_cli(
            ["quadrant", quadrant_csv, "--importance-scale", "0", "10"], capsys
        )
        assert code == 0
        assert len(out.strip().splitlines()) == 2

    def test_missing_importance_is_data_error(self, tmp_path, capsys):
        path = write(tmp_path, "q.csv",
                     "topic,stance,count,importance\nt,a,1,\nt,b,1,\n")
        code, _, err = run_cli(["quadrant", path, "--importance-scale", "0", "10"], capsys)
        assert code == EX_DATA
        assert json.loads(err.strip())["error"] == "MissingImportance"

    def test_missing_scale_is_usage_error(self, quadrant_csv, capsys):
        code, _, _ = run_cli(["quadrant", quadrant_csv], capsys)
        assert code == EX_USAGE


class TestConfigAndHelp:
    def test_config_supplies_defaults_flags_win(self, poll_csv, tmp_path, capsys):
        config = write(tmp_path, "cfg.json", json.dumps({"precision": 2}))
        code, out, _ = run_cli(["poll", poll_csv, "--config", config], capsys)
        assert code == 0 and "0.08\n" in out
        code, out, _ = run_cli(
            ["poll", poll_csv, "--config", config, "--precision", "4"], capsys
        )
        assert code == 0 and "0.0784\n" in out

    def test_unknown_config_key_is_data_error(self, poll_csv, tmp_path, capsys):
        config = write(tmp_path, "cfg.json", json.dumps({"frobnicate": 1}))
        code, _, err = run_cli(["poll", poll_csv, "--config", config], capsys)
        assert code == EX_DATA
        assert json.loads(err.strip())["error"] == "ConfigError"

    def test_no_subcommand_is_usage_error(self, capsys):
        code, _, _ = run_cli([], capsys)
        assert code == EX_USAGE

    @pytest.mark.parametrize("cmd", ["poll", "votes", "tweets", "quadrant"])
    def test_help_documents_flags_and_schemas(self, cmd, capsys):
        code, out, _ = run_cli([cmd, "--help"], capsys)
        assert code == 0
        for flag in ("--out", "--json", "--precision", "--threads", "--normalize"):
            assert flag in out
        assert "topic,stance,count" in out  # schema notes present

    def test_normalize_observed_flag(self, tmp_path, capsys):
        # three declared stances, only two observed: observed-k renormalizes
        path = write(tmp_path, "p.csv",
                     "topic,stance,count\nt,a,50\nt,b,50\nt,c,0\n")
        code, declared, _ = run_cli(["poll", path, "--precision", "4"], capsys)
        code2, observed, _ = run_cli(
            ["poll", path, "--precision", "4", "--normalize", "observed"], capsys
        )
        assert code == code2 == 0
        assert declared.strip().splitlines()[1].endswith("0.7500")
        assert observed.strip().splitlines()[1].endswith("1.0000")


class TestEntryPoint:
    def test_module_invocation_usage_error(self):
        proc = subprocess.run(
            [sys.executable, "-m", "contention", "poll", "--bogus-flag"],
            capture_output=True, text=True,
        )
        assert proc.returncode == EX_USAGE

    def test_module_invocation_help(self):
        proc = subprocess.run(
            [sys.executable, "-m", "contention", "--help"],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "poll" in proc.stdout and "quadrant" in proc.stdout
