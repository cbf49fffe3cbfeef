"""Code-template slot scanning: `<<name>>` marks where a variable appears."""

from __future__ import annotations

from dataclasses import dataclass

from .errors import TemplateError


@dataclass(frozen=True)
class TemplateSlot:
    variable_name: str
    position: int  # byte offset of `<<` in the template text


def extract_template_slots(template: str) -> list[TemplateSlot]:
    """Scan a template for `<<name>>` slots, in textual order.

    The same variable may occur at several positions. An opening `<<` with no
    closing `>>` raises TemplateError.
    """
    slots: list[TemplateSlot] = []
    i = 0
    while True:
        start = template.find("<<", i)
        if start < 0:
            return slots
        end = template.find(">>", start + 2)
        if end < 0:
            raise TemplateError(f"unbalanced '<<' at offset {start} (no closing '>>')")
        name = template[start + 2:end].strip()
        if not name or not _is_identifier(name):
            raise TemplateError(f"slot at offset {start} does not name a variable: {name!r}")
        slots.append(TemplateSlot(name, start))
        i = end + 2


def _is_identifier(name: str) -> bool:
    if not (name[0].isalpha() or name[0] == "_"):
        return False
    return all(c.isalnum() or c == "_" for c in name)


def substitute_slots(template: str, render) -> str:
    """Replace every slot with render(name); text outside slots is untouched."""
    out = []
    i = 0
    for slot in extract_template_slots(template):
        end = template.find(">>", slot.position) + 2
        out.append(template[i:slot.position])
        out.append(render(slot.variable_name))
        i = end
    out.append(template[i:])
    return "".join(out)
