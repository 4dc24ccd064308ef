from importlib import resources

import pytest

from declension import corpus

FIXTURE = resources.files("declension") / "data" / "fixture.conllu"


def conllu_line(tid, form, lemma, upos, feats="_", head=0, deprel="root"):
    return "\t".join([str(tid), form, lemma, upos, "_", feats, str(head), deprel, "_", "_"])


def synthetic_corpus(n, length=6):
    """n sentences of `length` tokens, each with one determiner + Nom noun."""
    blocks = []
    for k in range(n):
        lines = [f"# sent_id = g{k:03d}",
                 conllu_line(1, "το", "ο", "DET", "Case=Nom|Gender=Neut|Number=Sing", 2, "det"),
                 conllu_line(2, f"κέντρο{k}", f"κέντρο{k}", "NOUN",
                             "Case=Nom|Gender=Neut|Number=Sing", 0, "root")]
        for t in range(3, length + 1):
            lines.append(conllu_line(t, "και", "και", "CCONJ", "_", 2, "cc"))
        blocks.append("\n".join(lines) + "\n")
    return corpus.parse_conllu("\n".join(blocks))


@pytest.fixture(scope="session")
def fixture_path():
    return str(FIXTURE)


@pytest.fixture(scope="session")
def fixture_sentences():
    return corpus.read_conllu(str(FIXTURE))


ACCEPTANCE = []


@pytest.fixture
def criterion(request):
    """Records one PASS/FAIL line per acceptance criterion; shown in the summary."""
    def record(label, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'}  {label}: {detail}"
        ACCEPTANCE.append(line)
        print(line)
        assert ok, line
    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
