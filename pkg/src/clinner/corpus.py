"""Annotated documents and corpus directories.

A corpus directory holds ``<id>.txt`` (UTF-8 text) with an optional
``<id>.ann`` (BRAT standoff) per document, plus an optional
``doc_types.tsv`` mapping ``id<TAB>doc_type``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

from .annotation import read_brat, write_brat
from .text import DEFAULT_ABBREVIATIONS, RawDocument, TokenizedDocument, tokenize_document

DOC_TYPES_FILE = "doc_types.tsv"


@dataclass
class AnnotatedDocument:
    tdoc: TokenizedDocument
    mentions: list = field(default_factory=list)

    @property
    def id(self):
        return self.tdoc.doc.id

    @property
    def doc_type(self):
        return self.tdoc.doc.doc_type

    @property
    def text(self):
        return self.tdoc.doc.text

    @property
    def n_tokens(self):
        return len(self.tdoc)


def read_text(path) -> str:
    # newline="" keeps offsets identical to the bytes on disk
    with open(path, encoding="utf-8", newline="") as fh:
        return fh.read()


def write_text(path, text: str):
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def read_corpus(directory, types=None, abbreviations=DEFAULT_ABBREVIATIONS, with_annotations=True):
    directory = Path(directory)
    doc_types = {}
    meta = directory / DOC_TYPES_FILE
    if meta.exists():
        for line in read_text(meta).splitlines():
            if line.strip():
                doc_id, _, dtype = line.partition("\t")
                doc_types[doc_id] = dtype.strip() or "unknown"
    docs = []
    for txt in sorted(directory.glob("*.txt")):
        doc = RawDocument(txt.stem, read_text(txt), doc_types.get(txt.stem, "unknown"))
        ann = txt.with_suffix(".ann")
        mentions = []
        if with_annotations and ann.exists():
            mentions = read_brat(read_text(ann), doc, types)
        docs.append(AnnotatedDocument(tokenize_document(doc, abbreviations), mentions))
    return docs


def write_corpus(directory, docs, write_annotations=True):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for d in docs:
        write_text(directory / f"{d.id}.txt", d.text)
        if write_annotations:
            write_text(directory / f"{d.id}.ann", write_brat(d.mentions))
    write_text(directory / DOC_TYPES_FILE, "".join(f"{d.id}\t{d.doc_type}\n" for d in docs))


def write_annotations(directory, mentions_by_doc: dict):
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    for doc_id, mentions in sorted(mentions_by_doc.items()):
        write_text(directory / f"{doc_id}.ann", write_brat(mentions))


def read_annotations(directory, docs_or_dir, types=None) -> dict:
    """``.ann`` files of ``directory`` checked against the matching texts."""
    directory = Path(directory)
    if isinstance(docs_or_dir, (str, Path)):
        texts = {p.stem: RawDocument(p.stem, read_text(p)) for p in sorted(Path(docs_or_dir).glob("*.txt"))}
    else:
        texts = {d.id: d.tdoc.doc for d in docs_or_dir}
    out = {}
    for ann in sorted(directory.glob("*.ann")):
        doc = texts.get(ann.stem)
        if doc is None:
            raise FileNotFoundError(f"no text for annotation file {ann}")
        out[ann.stem] = read_brat(read_text(ann), doc, types)
    return out
