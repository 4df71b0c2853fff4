from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from typing import Mapping

from ..errors import TemplateError

log = logging.getLogger(__name__)

# ``{{`` / ``}}`` are escapes; ``{identifier}`` is a slot; any other brace
# (JSON examples inside prompt bodies) is literal text.
_TOKEN = re.compile(r"\{\{|\}\}|\{([A-Za-z_][A-Za-z0-9_]*)\}")


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    body: str

    @property
    def slots(self) -> list[str]:
        seen: list[str] = []
        for m in _TOKEN.finditer(self.body):
            name = m.group(1)
            if name and name not in seen:
                seen.append(name)
        return seen

    def render(self, **bindings) -> str:
        return render_template(self, bindings)


def render_template(template: PromptTemplate, bindings: Mapping[str, object]) -> str:
    unknown = set(bindings) - set(template.slots)
    if unknown:
        log.warning("template %s: ignoring unknown bindings %s", template.id, sorted(unknown))

    def substitute(m: re.Match) -> str:
        token = m.group(0)
        if token == "{{":
            return "{"
        if token == "}}":
            return "}"
        name = m.group(1)
        if name not in bindings:
            raise TemplateError(name)
        return str(bindings[name])

    return _TOKEN.sub(substitute, template.body)


def escape_braces(text: str) -> str:
    return text.replace("{", "{{").replace("}", "}}")


def unescape_braces(text: str) -> str:
    return text.replace("{{", "{").replace("}}", "}")
