#!/usr/bin/env python3
"""Regenerates the frozen oracle files in this directory.

Standalone reference implementations of the metrics, written directly from
their published definitions and independent of the Rust crate:

  * 13a-style tokenization (the language-independent rules of mteval-v13a)
  * corpus BLEU (clipped n-gram counts summed over the corpus, n = 1..4,
    geometric mean, brevity penalty on corpus lengths, scale 0-100)
  * sentence chrF (beta = 2, character n-grams up to 6, whitespace removed,
    per-order F averaged over orders present in either string)
  * sentence BLEU with add-one smoothing on orders >= 2 (printed for the
    hand-frozen unit-test values, not written to a file)

Usage: python3 provenance.py   (run from this directory)

Outputs:
  oracle_corpus_bleu.txt    one float, corpus BLEU of hyps.txt vs refs.txt
  oracle_chrf_sentence.txt  one float per line, sentence chrF in [0, 1]
"""

import math
import re
from collections import Counter

TOKENIZE_13A = [
    # punctuation block of mteval-v13a's language-independent tokenization
    (re.compile(r"([\{-\~\[-\` -\&\(-\+\:-\@\/])"), r" \1 "),
    # period and comma unless preceded by a digit
    (re.compile(r"([^0-9])([\.,])"), r"\1 \2 "),
    # period and comma unless followed by a digit
    (re.compile(r"([\.,])([^0-9])"), r" \1 \2"),
    # dash when preceded by a digit
    (re.compile(r"([0-9])(\-)"), r"\1 \2 "),
]


def tokenize_13a(line):
    norm = f" {line} "
    for pattern, repl in TOKENIZE_13A:
        norm = pattern.sub(repl, norm)
    return norm.split()


def ngram_counts(tokens, n):
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def corpus_bleu(hyps, refs, max_n=4):
    assert len(hyps) == len(refs)
    matches = [0] * max_n
    totals = [0] * max_n
    hyp_len = 0
    ref_len = 0
    for hyp, ref in zip(hyps, refs):
        hyp_toks = tokenize_13a(hyp)
        ref_toks = tokenize_13a(ref)
        hyp_len += len(hyp_toks)
        ref_len += len(ref_toks)
        for n in range(1, max_n + 1):
            hc = ngram_counts(hyp_toks, n)
            rc = ngram_counts(ref_toks, n)
            matches[n - 1] += sum(min(c, rc[g]) for g, c in hc.items())
            totals[n - 1] += sum(hc.values())
    if hyp_len == 0:
        return 0.0
    log_sum = 0.0
    orders = 0
    for m, t in zip(matches, totals):
        if t == 0 and m == 0:
            continue  # order absent from the whole corpus
        if m == 0:
            return 0.0
        log_sum += math.log(m / t)
        orders += 1
    if orders == 0:
        return 0.0
    bp = 1.0 if hyp_len >= ref_len else math.exp(1.0 - ref_len / hyp_len)
    return 100.0 * bp * math.exp(log_sum / orders)


def char_ngrams(text, n):
    chars = [c for c in text if not c.isspace()]
    return Counter(tuple(chars[i:i + n]) for i in range(len(chars) - n + 1))


def sentence_chrf(hyp, ref, max_n=6, beta=2.0):
    hyp_chars = [c for c in hyp if not c.isspace()]
    ref_chars = [c for c in ref if not c.isspace()]
    if not hyp_chars and not ref_chars:
        return 1.0
    if not hyp_chars or not ref_chars:
        return 0.0
    factor = beta * beta
    f_sum = 0.0
    orders = 0
    for n in range(1, max_n + 1):
        hc = char_ngrams(hyp, n)
        rc = char_ngrams(ref, n)
        h_total = sum(hc.values())
        r_total = sum(rc.values())
        if h_total == 0 and r_total == 0:
            continue  # order longer than both strings
        orders += 1
        if h_total == 0 or r_total == 0:
            continue  # F contribution is 0
        match = sum(min(c, rc[g]) for g, c in hc.items())
        prec = match / h_total
        rec = match / r_total
        denom = factor * prec + rec
        if denom > 0.0:
            f_sum += (1.0 + factor) * prec * rec / denom
    return f_sum / orders


def sentence_bleu_add1(hyp, ref, max_n=4):
    hyp_toks = tokenize_13a(hyp)
    ref_toks = tokenize_13a(ref)
    if not hyp_toks:
        return 0.0
    log_sum = 0.0
    for n in range(1, max_n + 1):
        hc = ngram_counts(hyp_toks, n)
        rc = ngram_counts(ref_toks, n)
        match = sum(min(c, rc[g]) for g, c in hc.items())
        total = sum(hc.values())
        if n == 1:
            p = match / total
        else:
            p = (match + 1) / (total + 1)
        if p == 0.0:
            return 0.0
        log_sum += math.log(p)
    bp = 1.0
    if len(hyp_toks) < len(ref_toks):
        bp = math.exp(1.0 - len(ref_toks) / len(hyp_toks))
    return bp * math.exp(log_sum / max_n)


def main():
    with open("hyps.txt", encoding="utf-8") as f:
        hyps = [l.rstrip("\n") for l in f if l.strip()]
    with open("refs.txt", encoding="utf-8") as f:
        refs = [l.rstrip("\n") for l in f if l.strip()]
    assert len(hyps) == len(refs) == 20

    bleu = corpus_bleu(hyps, refs)
    with open("oracle_corpus_bleu.txt", "w", encoding="utf-8") as f:
        f.write(f"{bleu!r}\n")
    print(f"corpus BLEU = {bleu!r}")

    with open("oracle_chrf_sentence.txt", "w", encoding="utf-8") as f:
        for hyp, ref in zip(hyps, refs):
            f.write(f"{sentence_chrf(hyp, ref)!r}\n")
    print("wrote 20 sentence chrF values")

    # values frozen by hand into unit tests
    print(f"chrf('kočka sedí', 'kočka spí') = {sentence_chrf('kočka sedí', 'kočka spí')!r}")
    print(f"sbleu('the the the', 'the cat sat') = {sentence_bleu_add1('the the the', 'the cat sat')!r}")
    print(f"tokens_13a('Nech toho, Pavle: 3.5 km, ne 3,5!') = {tokenize_13a('Nech toho, Pavle: 3.5 km, ne 3,5!')}")


if __name__ == "__main__":
    main()
