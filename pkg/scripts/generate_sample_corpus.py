"""Regenerate the bundled synthetic corpus: python scripts/generate_sample_corpus.py"""

from pathlib import Path

from intentlens.sample import write_sample_corpus

if __name__ == "__main__":
    target = Path(__file__).resolve().parents[1] / "src" / "intentlens" / "data" / "sample_corpus.jsonl"
    write_sample_corpus(target)
    print(target)
