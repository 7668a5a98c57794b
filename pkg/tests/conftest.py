from __future__ import annotations

import pytest

from attribqa.citations import Passage, parse_answer

# The worked example: one answer written at all three citation levels.
WORKED_SPAN = (
    '" [ 1 Johnny Panic and the Bible of Dreams ] " [ 1 is a song by the British band Tears for Fears ] . '
    "They also have [ 5 international hit singles ] such as: "
    '[ 5 "Mothers Talk", "Shout", "Everybody Wants to Rule the World", "Head over Heels", and "I Believe". ]'
)
WORKED_SENTENCE = (
    '" Johnny Panic and the Bible of Dreams " is a song by the British band Tears for Fears [1]. '
    'They also have international hit singles such as: "Mothers Talk", "Shout", '
    '"Everybody Wants to Rule the World", "Head over Heels", and "I Believe" [5].'
)
WORKED_PASSAGE = (
    '" Johnny Panic and the Bible of Dreams " is a song by the British band Tears for Fears. '
    'They also have international hit singles such as: "Mothers Talk", "Shout", '
    '"Everybody Wants to Rule the World", "Head over Heels", and "I Believe" [1][5].'
)

COT_SPAN = """Lets analyze the relevant spans of information from the input passages.
From passage [1], the relevant spans are the following:
  * Johnny Panic and the Bible of Dreams
  * is a song by the British band Tears for Fears
From passage [5], the relevant spans are the following:
  * international hit singles
  * "Mothers Talk", "Shout", "Everybody Wants to Rule the World", "Head
over Heels", and "I Believe".
Thus, the final answer is:"""

COT_SENTENCE = """Lets analyze the relevant information from the input passages.
From passage [1], we know that: " Johnny Panic and the Bible of Dreams "
is a song by the British band Tears for Fears .
From passage [5], we know that: They also have international hit singles
such as: "Mothers Talk", "Shout", "Everybody Wants to Rule the World", "Head
over Heels", and "I Believe".
Thus, the final answer is:"""

COT_PASSAGE = """Lets analyze the input passages.
The only relevant passages to the question are passages 1, 5.
Thus, the final answer is:"""


def worked_passages() -> list[Passage]:
    texts = {
        1: '"Johnny Panic and the Bible of Dreams" is a song by the British band Tears for Fears, '
        "released as the B-side of the 1990 single.",
        2: "Mark Crew produced the album at his studio.",
        3: "Raoul and the Kings of Spain is the fifth studio album.",
        4: "Everybody Loves a Happy Ending is an album from 2004.",
        5: 'Songs from the Big Chair includes the 1985 international hit singles "Mothers Talk", "Shout", '
        '"Everybody Wants to Rule the World", "Head over Heels", and "I Believe".',
    }
    return [Passage(i, t, title=f"Doc {i}") for i, t in texts.items()]


@pytest.fixture
def worked_gold():
    return parse_answer(WORKED_SPAN, "span")


@pytest.fixture
def passages():
    return worked_passages()


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance")
        for line in lines:
            terminalreporter.write_line(line)
