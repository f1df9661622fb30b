"""Command-line entry point.

Subcommands: parse, stats, compare, rst2dep, eval, encode, synth-neg,
mock-serve.  Outputs are deterministic given identical inputs and seed;
file-producing commands write a ``.manifest.json`` sidecar.  Exit codes:
0 success, 2 usage, 3 data error, 4 backend error.
"""

from __future__ import annotations

import contextlib
import json
import sys
from pathlib import Path

import click

from qudparse import __version__
from qudparse.agreement import AgreementError
from qudparse.backend import HttpBackend, MockBackend, create_app
from qudparse.backend.client import BackendError
from qudparse.core import QudParseError
from qudparse.encoding import (
    EntitySpan,
    encode_anchor_query,
    encode_generation_prompt,
)
from qudparse.evaluation import (
    Q1_COLUMN_ORDER,
    Q1_DISPLAY,
    Q2_COLUMN_ORDER,
    Q2_DISPLAY,
    aggregate_q1,
    aggregate_q2,
    agreement_summary,
    load_judgments,
    restrict_to_q2_subset,
    synth_negatives,
)
from qudparse.ingest import (
    load_articles,
    load_questions,
    load_tree_records,
    save_tree_records,
    tree_record_from_dep,
    tree_record_from_qud,
)
from qudparse.manifest import write_manifest
from qudparse.metrics import (
    CorpusRow,
    MeanStats,
    attachment_score,
    gap_of_parent_map,
    gap_report,
    partial_stats,
    stats,
    write_table,
)
from qudparse.pipeline import ParseConfig, parse, variant_config
from qudparse.rst import load_rst_records, to_dep

EXIT_DATA_ERROR = 3
EXIT_BACKEND_ERROR = 4


@contextlib.contextmanager
def _open_out(out: "str | None"):
    if out is None:
        yield sys.stdout
    else:
        with open(out, "w", encoding="utf-8") as handle:
            yield handle


@click.group()
@click.version_option(version=__version__, prog_name="qudparse")
def cli() -> None:
    """Derive, measure, and evaluate question-labeled dependency trees."""


@cli.command(name="parse")
@click.argument("articles", type=click.Path(exists=True, dir_okay=False))
@click.option("--backend-url", envvar="QUD_BACKEND_URL",
              help="Backend base URL (or set QUD_BACKEND_URL).")
@click.option("--mock", is_flag=True, help="Use the in-process deterministic backend.")
@click.option("--seed", type=int, default=0, show_default=True,
              help="Seed recorded in the manifest and sent to sampling backends.")
@click.option("--num-samples", type=int, default=10, show_default=True,
              help="Candidate questions sampled per sentence.")
@click.option("--top-p", type=float, default=0.9, show_default=True,
              help="Nucleus sampling mass.")
@click.option("--no-rerank", is_flag=True, help="Keep the first sample instead of reranking.")
@click.option("--no-mask", is_flag=True, help="Skip entity masking of the answer sentence.")
@click.option("--variant", type=str, default=None,
              help="Named system variant (full, -Reranking, -NER); overrides the flags above.")
@click.option("--fail-policy", type=click.Choice(["fast", "skip"]), default="fast",
              show_default=True, help="What to do when a sentence fails.")
@click.option("--max-workers", type=int, default=1, show_default=True,
              help="Concurrent per-sentence requests.")
@click.option("--timeout", type=float, default=60.0, show_default=True,
              help="Per-request timeout in seconds.")
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Tree file to write (stdout when omitted).")
def parse_command(articles, backend_url, mock, seed, num_samples, top_p, no_rerank,
                  no_mask, variant, fail_policy, max_workers, timeout, out):
    """Parse every article in ARTICLES into a question-labeled tree."""
    if not mock and not backend_url:
        raise click.UsageError("parse needs --backend-url (or QUD_BACKEND_URL) or --mock")
    if mock and backend_url:
        raise click.UsageError("--mock and --backend-url are mutually exclusive")
    if variant is not None:
        config = variant_config(variant, seed=seed, num_samples=num_samples,
                                top_p=top_p, fail_policy=fail_policy,
                                max_workers=max_workers)
    else:
        config = ParseConfig(
            num_samples=num_samples, top_p=top_p, mask_entities=not no_mask,
            rerank=not no_rerank, seed=seed, fail_policy=fail_policy,
            max_workers=max_workers,
        )
    documents = load_articles(articles)
    backend = MockBackend(seed=seed) if mock else HttpBackend(backend_url, timeout=timeout)
    try:
        results = [parse(doc, backend, config, variant=variant) for doc in documents]
    finally:
        if isinstance(backend, HttpBackend):
            backend.close()
    with _open_out(out) as handle:
        save_tree_records([tree_record_from_qud(r.tree) for r in results], handle)
    if out:
        trace_path = Path(out + ".trace.json")
        trace_path.write_text(
            json.dumps([r.trace.to_dict() for r in results], indent=2) + "\n",
            encoding="utf-8",
        )
        write_manifest(
            command="parse",
            config={**config.__dict__, "variant": variant,
                    "backend": "mock" if mock else backend_url},
            inputs=[articles],
            outputs=[out, trace_path],
            seed=seed,
        )
    skipped = sum(len(r.trace.failures) for r in results)
    if skipped:
        click.echo(f"warning: {skipped} sentences skipped", err=True)


def _record_row(record, paired_record, paper_convention):
    if record.is_complete:
        dep = record.dep_tree()
        tree_stats = stats(dep)
        gaps = gap_report(dep)
        means = MeanStats(
            height=float(tree_stats.height),
            norm_arc_len=tree_stats.norm_arc_len,
            prop_leaf=tree_stats.prop_leaf,
            avg_depth=tree_stats.avg_depth,
            right_branch=tree_stats.right_branch,
        )
        partial = False
    else:
        means, _ = partial_stats(record.n, dict(record.parents))
        gaps = gap_of_parent_map(record.n, dict(record.parents))
        partial = True
    att = None
    if paired_record is not None and record.is_complete and paired_record.is_complete:
        att = attachment_score(record.dep_tree(), paired_record.dep_tree(),
                               paper_convention=paper_convention)
    return CorpusRow(
        label=record.article_id, trees=1, stats=means,
        gap_max=float(gaps.gap_degree_max), gap_total=float(gaps.gap_total),
        att_score=att, partial=partial,
    )


def _mean_row(rows):
    k = len(rows)
    atts = [r.att_score for r in rows if r.att_score is not None]
    return CorpusRow(
        label="MEAN", trees=k,
        stats=MeanStats(
            height=sum(r.stats.height for r in rows) / k,
            norm_arc_len=sum(r.stats.norm_arc_len for r in rows) / k,
            prop_leaf=sum(r.stats.prop_leaf for r in rows) / k,
            avg_depth=sum(r.stats.avg_depth for r in rows) / k,
            right_branch=sum(r.stats.right_branch for r in rows) / k,
        ),
        gap_max=sum(r.gap_max for r in rows) / k,
        gap_total=sum(r.gap_total for r in rows) / k,
        att_score=sum(atts) / len(atts) if atts else None,
        partial=any(r.partial for r in rows),
    )


@cli.command(name="stats")
@click.argument("trees", type=click.Path(exists=True, dir_okay=False))
@click.option("--paired", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Second tree file, aligned by article id, for attachment scores.")
@click.option("--paper-convention", is_flag=True,
              help="Divide attachment matches by n instead of n-1.")
@click.option("--pretty", is_flag=True, help="Aligned text instead of a TSV table.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def stats_command(trees, paired, paper_convention, pretty, out):
    """Per-article tree statistics plus a mean row."""
    records = load_tree_records(trees)
    if not records:
        raise QudParseError(f"no tree records in {trees}")
    paired_by_id = {}
    if paired:
        paired_by_id = {rec.article_id: rec for rec in load_tree_records(paired)}
        missing = [r.article_id for r in records if r.article_id not in paired_by_id]
        if missing:
            raise QudParseError(f"paired file lacks articles: {missing}")
    rows = [
        _record_row(record, paired_by_id.get(record.article_id), paper_convention)
        for record in records
    ]
    rows.append(_mean_row(rows))
    with _open_out(out) as handle:
        write_table(rows, handle, pretty=pretty)
    if out:
        write_manifest(
            command="stats",
            config={"paired": paired, "paper_convention": paper_convention,
                    "pretty": pretty},
            inputs=[trees] + ([paired] if paired else []),
            outputs=[out], seed=0,
        )


@cli.command(name="compare")
@click.argument("trees_a", type=click.Path(exists=True, dir_okay=False))
@click.argument("trees_b", type=click.Path(exists=True, dir_okay=False))
@click.option("--paper-convention", is_flag=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def compare_command(trees_a, trees_b, paper_convention, out):
    """Attachment score between two tree files, aligned by article id."""
    left = {rec.article_id: rec for rec in load_tree_records(trees_a)}
    right = {rec.article_id: rec for rec in load_tree_records(trees_b)}
    shared = sorted(set(left) & set(right))
    if not shared:
        raise QudParseError("no shared article ids between the two files")
    scores = []
    with _open_out(out) as handle:
        handle.write("article_id\tatt_score\n")
        for article_id in shared:
            score = attachment_score(
                left[article_id].dep_tree(), right[article_id].dep_tree(),
                paper_convention=paper_convention,
            )
            scores.append(score)
            handle.write(f"{article_id}\t{score!r}\n")
        handle.write(f"MEAN\t{sum(scores) / len(scores)!r}\n")
    if out:
        write_manifest(
            command="compare",
            config={"paper_convention": paper_convention},
            inputs=[trees_a, trees_b], outputs=[out], seed=0,
        )


@cli.command(name="rst2dep")
@click.argument("rst_file", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def rst2dep_command(rst_file, out):
    """Convert bracketed constituency trees into dependency tree records."""
    records = [
        tree_record_from_dep(article_id, to_dep(tree))
        for article_id, tree in load_rst_records(rst_file)
    ]
    with _open_out(out) as handle:
        save_tree_records(records, handle)
    if out:
        write_manifest(command="rst2dep", config={}, inputs=[rst_file],
                       outputs=[out], seed=0)


def _format_eval(records, pretty, handle):
    q1 = aggregate_q1(records)
    handle.write("# response-level percentages\n")
    if pretty:
        handle.write("Q1  " + "  ".join(
            f"{Q1_DISPLAY[label]} {q1.fine[label]:.1f}" for label in Q1_COLUMN_ORDER
        ) + "\n")
    else:
        handle.write("q1\t" + "\t".join(label.value for label in Q1_COLUMN_ORDER) + "\n")
        handle.write("q1_pct\t" + "\t".join(
            f"{q1.fine[label]!r}" for label in Q1_COLUMN_ORDER) + "\n")
    subset = restrict_to_q2_subset(records)
    if subset:
        q2 = aggregate_q2(subset)
        if pretty:
            handle.write("Q2  " + "  ".join(
                f"{Q2_DISPLAY[label]} {q2.percentages[label]:.1f}"
                for label in Q2_COLUMN_ORDER
            ) + f"  (subset of {len(set(r.question_id for r in subset))} questions)\n")
        else:
            handle.write("q2\t" + "\t".join(label.value for label in Q2_COLUMN_ORDER) + "\n")
            handle.write("q2_pct\t" + "\t".join(
                f"{q2.percentages[label]!r}" for label in Q2_COLUMN_ORDER) + "\n")
    else:
        handle.write("# q2 subset empty: no question passed the unanimity rule\n")
    try:
        summary = agreement_summary(records)
    except AgreementError as exc:
        handle.write(f"# agreement undefined: {exc}\n")
        return
    if pretty:
        handle.write(
            f"agreement  all-agree {summary.all_agree_pct:.0f}%  "
            f"majority {summary.majority_pct:.0f}%  "
            f"alpha yes-vs-others {summary.alpha_yes_vs_others:.3f}  "
            f"coarse {summary.alpha_coarse:.3f}  fine {summary.alpha_fine:.3f}\n"
        )
    else:
        handle.write("agreement\tall_agree_pct\tmajority_pct\talpha_yes_vs_others"
                     "\talpha_coarse\talpha_fine\n")
        handle.write(
            "agreement_values\t"
            f"{summary.all_agree_pct!r}\t{summary.majority_pct!r}\t"
            f"{summary.alpha_yes_vs_others!r}\t{summary.alpha_coarse!r}\t"
            f"{summary.alpha_fine!r}\n"
        )


@cli.command(name="eval")
@click.argument("judgments", type=click.Path(exists=True, dir_okay=False))
@click.option("--pretty", is_flag=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def eval_command(judgments, pretty, out):
    """Aggregate a human-judgment file into acceptability and
    answerability tables plus agreement statistics."""
    records = load_judgments(judgments)
    with _open_out(out) as handle:
        _format_eval(records, pretty, handle)
    if out:
        write_manifest(command="eval", config={"pretty": pretty},
                       inputs=[judgments], outputs=[out], seed=0)


@cli.command(name="encode")
@click.argument("articles", type=click.Path(exists=True, dir_okay=False))
@click.option("--article", "article_id", required=True, help="Article id to encode.")
@click.option("--answer", type=int, required=True, help="Answer sentence index.")
@click.option("--mode", type=click.Choice(["anchor", "generation"]), default="anchor",
              show_default=True)
@click.option("--anchor", type=int, default=None,
              help="Anchor sentence index (generation mode).")
@click.option("--question", type=str, default=None,
              help="Append a question part (generation mode).")
@click.option("--spans", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON list of {token_start, token_end, entity_type} for the answer.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def encode_command(articles, article_id, answer, mode, anchor, question, spans, out):
    """Print the exact model-input rendering for one sentence pair."""
    documents = {doc.article_id: doc for doc in load_articles(articles)}
    if article_id not in documents:
        raise QudParseError(f"article {article_id!r} not in {articles}")
    doc = documents[article_id]
    if mode == "anchor":
        rendering = encode_anchor_query(doc, answer).text
    else:
        if anchor is None:
            raise click.UsageError("generation mode needs --anchor")
        entity_spans = []
        if spans:
            rows = json.loads(Path(spans).read_text(encoding="utf-8"))
            entity_spans = [
                EntitySpan(sentence_index=answer, token_start=int(r["token_start"]),
                           token_end=int(r["token_end"]),
                           entity_type=str(r["entity_type"]))
                for r in rows
            ]
        rendering = encode_generation_prompt(
            doc, answer, anchor, entity_spans, question=question
        ).render()
    with _open_out(out) as handle:
        handle.write(rendering + "\n")
    if out:
        write_manifest(
            command="encode",
            config={"article": article_id, "answer": answer, "mode": mode,
                    "anchor": anchor, "question": question, "spans": spans},
            inputs=[articles], outputs=[out], seed=0,
        )


@cli.command(name="synth-neg")
@click.argument("questions", type=click.Path(exists=True, dir_okay=False))
@click.argument("articles", type=click.Path(exists=True, dir_okay=False))
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def synth_neg_command(questions, articles, out):
    """Synthesize reranker negatives by swapping anchors and answers."""
    documents = {doc.article_id: doc for doc in load_articles(articles)}
    loaded = load_questions(questions, documents=documents.values())
    emitted = 0
    with _open_out(out) as handle:
        for record in loaded:
            if record.article_id not in documents:
                continue
            for example in synth_negatives(record, documents[record.article_id]):
                handle.write(json.dumps({
                    "article_id": example.article_id,
                    "question_text": example.question_text,
                    "anchor_index": example.anchor_index,
                    "answer_index": example.answer_index,
                    "label": example.label,
                }, ensure_ascii=False) + "\n")
                emitted += 1
    if out:
        write_manifest(command="synth-neg", config={}, inputs=[questions, articles],
                       outputs=[out], seed=0)
    click.echo(f"{emitted} negatives", err=True)


@cli.command(name="mock-serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8737, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def mock_serve_command(host, port, seed):
    """Serve the deterministic mock backend over HTTP."""
    import uvicorn

    uvicorn.run(create_app(MockBackend(seed=seed)), host=host, port=port,
                log_level="info")


def main() -> None:
    try:
        cli(standalone_mode=False)
    except click.exceptions.Abort:
        sys.exit(130)
    except click.ClickException as exc:
        exc.show()
        sys.exit(exc.exit_code)
    except QudParseError as exc:
        backendish = isinstance(exc, BackendError) or isinstance(
            exc.__cause__, BackendError
        )
        click.echo(("backend error: " if backendish else "error: ") + str(exc), err=True)
        sys.exit(EXIT_BACKEND_ERROR if backendish else EXIT_DATA_ERROR)


if __name__ == "__main__":
    main()
