"""Walk through the three citation levels on one answer.

Run with ``python demos/01_citation_markup.py``.
"""
from __future__ import annotations

from attribqa import parse_answer, serialize, strip_citations, convert_level, cited_content

# A span-level answer: every copied span names the passage it came from.
raw = ('" [ 1 Johnny Panic and the Bible of Dreams ] " [ 1 is a song by the British band Tears for Fears ] . '
       "They also have [ 5 international hit singles ] such as: "
       '[ 5 "Mothers Talk", "Shout", "Everybody Wants to Rule the World", "Head over Heels", and "I Believe". ]')

span = parse_answer(raw, "span")
print("spans:", len(span.spans))
for s in span.spans:
    print(f"  [{s.passage_index}] {s.text}")

# serialize gives back the canonical text, so parse -> serialize -> parse is stable
assert parse_answer(serialize(span), "span") == span

# coarser levels come for free
sentence = convert_level(span, "sentence")
passage = convert_level(span, "passage")
print("\nsentence level:\n ", serialize(sentence))
print("passage level:\n ", serialize(passage))

# the plain answer, with every citation removed
print("\nplain:", strip_citations(sentence))

# which text each passage is credited with
for idx, texts in sorted(cited_content(span).items()):
    print(f"passage {idx}: {texts}")

# lenient parsing never fails; malformed markup stays as text
messy = parse_answer("Paris is big [ 1 capital of France and [bad] markup", "span")
print("\nlenient:", serialize(messy))
try:
    parse_answer("Paris is big [ 1 capital of France", "span", strict=True)
except ValueError as exc:
    print("strict:", exc)
