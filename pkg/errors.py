"""Exceções do solver de seleção de modo D2D

status_code é o código HTTP usado pelos routers.
"""


class D2DError(Exception):
    """Erro base da biblioteca"""

    status_code = 422


class DomainError(D2DError, ValueError):
    """Argumento fora do domínio da operação (distância, tempo, configuração)"""


class InfeasibleError(D2DError):
    """Instância ou subconjunto de pares sem alocação factível"""


class ScenarioParseError(D2DError):
    """Arquivo de cenário/campanha malformado"""

    status_code = 400

    def __init__(self, message: str, field: str | None = None, line: int | None = None):
        self.field = field
        self.line = line
        where = []
        if line is not None:
            where.append(f"linha {line}")
        if field is not None:
            where.append(f"campo '{field}'")
        super().__init__(f"{message} ({', '.join(where)})" if where else message)


class ContractViolation(D2DError):
    """Pré-condição interna violada"""


class MissingRowsError(D2DError):
    """Faltam linhas de resultado de algum solver"""

    def __init__(self, kind: str, missing: list[str]):
        self.kind = kind
        self.missing = missing
        super().__init__(
            f"'{kind}' requer resultados de: {', '.join(missing)}; rode a campanha com esses solvers"
        )
