from hypothesis import given, strategies as st

from declension.corpus import NounInstance
from declension.ngram import (IDENTITY, LEMMA, PAIR, BackoffInflector, predict_case_ngram,
                              predict_ngram, train_ngram)


def inst(article, lemma, form, case="Nom"):
    return NounInstance("s", 1, None if article is None else 0, article, case, "Sing",
                        "Neut", lemma, form)


def kentro_model():
    data = [inst("το", "κέντρο", "κέντρο")] * 3 + [inst("το", "κέντρο", "κέντρα", "Acc")]
    return train_ngram(data)


def test_pair_counts():
    m = kentro_model()
    assert m.pair_counts[("το", "κέντρο")] == {"κέντρο": 3, "κέντρα": 1}
    assert m.lemma_counts["κέντρο"] == {"κέντρο": 3, "κέντρα": 1}
    assert predict_ngram(m, "το", "κέντρο") == ("κέντρο", PAIR)


def test_empty_model():
    m = train_ngram([])
    assert m.pair_counts == m.lemma_counts == m.case_pair_counts == {}
    assert predict_ngram(m, "ο", "ξ") == ("ξ", IDENTITY)


def test_articleless_instance_only_feeds_lemma():
    m = train_ngram([inst(None, "πόλη", "πόλης", "Gen")])
    assert m.pair_counts == {} and m.lemma_counts == {"πόλη": {"πόλης": 1}}
    assert predict_ngram(m, "της", "πόλη") == ("πόλης", LEMMA)
    assert predict_case_ngram(m, None, "πόλη") is None


def test_articles_lowercased():
    m = train_ngram([inst("Το", "κέντρο", "κέντρο")])
    assert ("το", "κέντρο") in m.pair_counts
    assert predict_ngram(m, "ΤΟ", "κέντρο")[1] == PAIR


def test_form_tie_lexicographic():
    m = train_ngram([inst("το", "x", "β")] * 2 + [inst("το", "x", "α")] * 2)
    assert predict_ngram(m, "το", "x") == ("α", PAIR)


def test_case_prediction():
    data = [inst("τα", "κέντρο", "κέντρα", "Nom")] * 4 + [inst("τα", "κέντρο", "κέντρα", "Acc")]
    assert predict_case_ngram(train_ngram(data), "τα", "κέντρο") == "Nom"
    assert predict_case_ngram(train_ngram(data), "τα", "ξ") is None
    tie = [inst("της", "x", "y", "Gen"), inst("της", "x", "y", "Nom")]
    assert predict_case_ngram(train_ngram(tie), "της", "x") == "Nom"
    # inventory order, not alphabetical
    tie = [inst("της", "x", "y", "Acc"), inst("της", "x", "y", "Gen")]
    assert predict_case_ngram(train_ngram(tie), "της", "x") == "Gen"


def test_json_round_trip_and_bytes():
    m = kentro_model()
    text = m.to_json()
    assert text == kentro_model().to_json()
    again = BackoffInflector.from_json(text)
    assert again.to_json() == text
    assert predict_ngram(again, "το", "κέντρο") == ("κέντρο", PAIR)


words = st.sampled_from(["α", "β", "γ", "αβ"])
arts = st.sampled_from(["ο", "η", "το", None])


@given(st.lists(st.tuples(arts, words, words), max_size=12), arts, words)
def test_properties(rows, article, lemma):
    data = [inst(a, l, f) for a, l, f in rows]
    m = train_ngram(data)
    form, level = predict_ngram(m, article, lemma)
    assert form
    if level == PAIR:
        assert (article, lemma, form) in {(a, l, f) for a, l, f in rows}
    for (a, l), counts in m.pair_counts.items():
        assert all(c >= 1 and m.lemma_counts[l][f] >= c for f, c in counts.items())
    assert predict_ngram(train_ngram(data * 2), article, lemma) == (form, level)
