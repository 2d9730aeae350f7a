"""Exception hierarchy.

Contract errors are surfaced to users by class name (``Unauthorized``,
``BadRange``, ...), so the names here are part of the CLI contract.
"""


class BCCError(Exception):
    """Base class for every error raised by this package."""

    @property
    def name(self) -> str:
        return type(self).__name__


# -- encoding / ledger -------------------------------------------------------


class EncodingError(BCCError, ValueError):
    pass


class OversizeField(EncodingError):
    pass


class LedgerFormatError(BCCError):
    pass


class UnknownSubmitter(BCCError):
    pass


class NonMonotonicTimestamp(BCCError):
    pass


class LinkMismatch(BCCError):
    pass


class HeightMismatch(BCCError):
    pass


class BadBlockHash(BCCError):
    pass


class TxRejected(BCCError):
    """Transaction refused before contract execution (signature or nonce)."""


class InvalidSignature(TxRejected):
    pass


class ReplayedNonce(TxRejected):
    pass


# -- contract ------------------------------------------------------------------


class ContractError(BCCError):
    pass


class Unauthorized(ContractError):
    pass


class UnknownItem(ContractError):
    pass


class UnknownLocation(ContractError):
    pass


class CustodyConflict(ContractError):
    pass


class StaleTimestamp(ContractError):
    pass


class InactiveLocation(ContractError):
    pass


class DuplicateId(ContractError):
    pass


class DuplicateDeploy(ContractError):
    pass


class BadRange(ContractError):
    pass


class OutOfGlobalBounds(ContractError):
    pass


# -- payload store ---------------------------------------------------------------


class MissingPayload(ContractError):
    pass


class CorruptPayload(ContractError):
    pass


class DumpRefMismatch(ContractError):
    pass


# -- simulation ------------------------------------------------------------------


class NodeDown(BCCError):
    pass


class UnknownNode(BCCError):
    pass


class InvalidCandidate(BCCError):
    pass


class ScenarioError(BCCError):
    pass


# -- sensors ---------------------------------------------------------------------


class BadProfile(BCCError, ValueError):
    pass


class WindowOutOfRange(BCCError, ValueError):
    pass
