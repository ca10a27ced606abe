#!/usr/bin/env python3
"""Run the retrieval benchmark against a locally downloaded MLDR English split.

The full dataset is not bundled. Download the English corpus and dev/test
queries (e.g. from the MLDR distribution on the HuggingFace hub), export them
as JSON lines, and point this script at the files:

  corpus file: one record per line with fields `docid` and `text`
  query file:  one record per line with fields `query_id`, `query`, and
               `positive_docids` (list)

Example:
  python scripts/run_mldr_en.py --corpus mldr-corpus.jsonl \
      --queries mldr-dev.jsonl --strategy most-fields

Expansion strategies additionally need --ontology/--lexicon files in the
formats described in the README (a Wikidata-derived ontology at full scale).
"""

import argparse
import json
import sys
import tempfile
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from docfunnel.evaluation import evaluate_run, load_mldr_subset  # noqa: E402
from docfunnel.expansion import STRATEGIES, load_ontology, load_verb_lexicon  # noqa: E402
from docfunnel.sparse import build_index  # noqa: E402


def convert(corpus_in: Path, queries_in: Path, out_dir: Path) -> dict:
    paths = {
        "corpus": out_dir / "corpus.jsonl",
        "queries": out_dir / "queries.tsv",
        "qrels": out_dir / "qrels.tsv",
    }
    with corpus_in.open(encoding="utf-8") as fh, paths["corpus"].open(
        "w", encoding="utf-8"
    ) as out:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            text = rec.get("text", "")
            # long articles arrive unstructured; paragraphs become sections
            sections = [
                {"heading": "", "text": part}
                for part in text.split("\n\n")
                if part.strip()
            ]
            out.write(
                json.dumps(
                    {
                        "id": str(rec["docid"]),
                        "title": rec.get("title", ""),
                        "abstract": "",
                        "sections": sections,
                        "metadata": {},
                    },
                    ensure_ascii=False,
                )
                + "\n"
            )
    with queries_in.open(encoding="utf-8") as fh, paths["queries"].open(
        "w", encoding="utf-8"
    ) as qout, paths["qrels"].open("w", encoding="utf-8") as rout:
        for line in fh:
            if not line.strip():
                continue
            rec = json.loads(line)
            qid = str(rec["query_id"])
            query = rec["query"].replace("\t", " ").replace("\n", " ")
            qout.write(f"{qid}\t{query}\n")
            for docid in rec.get("positive_docids", []):
                rout.write(f"{qid}\t{docid}\t1\n")
    return paths


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--corpus", required=True, type=Path)
    parser.add_argument("--queries", required=True, type=Path)
    parser.add_argument("--strategy", choices=STRATEGIES, default="most-fields")
    parser.add_argument("--ontology", type=Path)
    parser.add_argument("--lexicon", type=Path)
    parser.add_argument("--depth", type=int, default=1000)
    args = parser.parse_args()

    if args.strategy != "most-fields" and not args.ontology:
        parser.error(f"strategy {args.strategy} needs --ontology")

    with tempfile.TemporaryDirectory() as tmp:
        paths = convert(args.corpus, args.queries, Path(tmp))
        queries, corpus, qrels, warnings = load_mldr_subset(
            paths["queries"], paths["corpus"], paths["qrels"]
        )
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
        print(f"indexing {len(corpus)} documents ...", file=sys.stderr)
        index_set = build_index(corpus)
        ontology = None
        lexicon = None
        if args.ontology:
            ontology, onto_warnings = load_ontology(args.ontology)
            print(f"ontology loaded ({len(onto_warnings)} warnings)", file=sys.stderr)
        if args.lexicon:
            lexicon = load_verb_lexicon(args.lexicon)
        result = evaluate_run(
            index_set, queries, qrels, args.strategy,
            ontology=ontology, lexicon=lexicon, depth=args.depth,
        )
        print(json.dumps(result.summary_record()))
    return 0


if __name__ == "__main__":
    sys.exit(main())
