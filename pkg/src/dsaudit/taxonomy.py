"""Privacy-relevance tiers, data categories and the Play data-safety vocabulary.

Every detected data source carries a :class:`PrivacyLabel` (a risk-ranked
relevance tier plus a data category) refined by an :class:`IdentifierTag`.
Enum values are the stable lower_snake machine names used in dataset files
and reports.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum, IntEnum
from fnmatch import fnmatchcase
from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from dsaudit.datasets import CategoryMapping


class TaxonomyError(ValueError):
    pass


class UnknownRelevance(TaxonomyError):
    pass


class UnknownCategory(TaxonomyError):
    pass


class InvalidRankCategoryPair(TaxonomyError):
    pass


class EmptyIdentifier(TaxonomyError):
    pass


class RiskRank(IntEnum):
    DIRECT = 1
    PARTIAL = 2
    ACCESS = 3
    CONTEXT = 4

    @property
    def relevance(self) -> PrivacyRelevance:
        return _RANK_TO_RELEVANCE[self]


class PrivacyRelevance(Enum):
    DIRECTLY_IDENTIFIABLE = "directly_identifiable"
    PARTIALLY_IDENTIFIABLE = "partially_identifiable"
    ACCESS_DATA = "access_data"
    CONTEXT_DEPENDENT = "context_dependent"

    @property
    def rank(self) -> RiskRank:
        return _RELEVANCE_TO_RANK[self]


_RANK_TO_RELEVANCE = {
    RiskRank.DIRECT: PrivacyRelevance.DIRECTLY_IDENTIFIABLE,
    RiskRank.PARTIAL: PrivacyRelevance.PARTIALLY_IDENTIFIABLE,
    RiskRank.ACCESS: PrivacyRelevance.ACCESS_DATA,
    RiskRank.CONTEXT: PrivacyRelevance.CONTEXT_DEPENDENT,
}
_RELEVANCE_TO_RANK = {v: k for k, v in _RANK_TO_RELEVANCE.items()}

# Leading phrase of a rendered label, per rank.
_RELEVANCE_PHRASES = {
    RiskRank.DIRECT: "Directly identifiable",
    RiskRank.PARTIAL: "Partially identifiable",
    RiskRank.ACCESS: "Access",
    RiskRank.CONTEXT: "Context-dependent",
}


class DataCategory(Enum):
    PERSONAL_INFORMATION = "personal_information"
    DEVICE_OR_OTHER_IDS = "device_or_other_ids"
    FINANCIAL_INFORMATION = "financial_information"
    LOCATION_DATA = "location_data"
    DEVICE_DATA = "device_data"
    AUDIO_DATA = "audio_data"
    BROWSING_DATA = "browsing_data"
    APP_ACTIVITY = "app_activity"
    PHOTOS_AND_VIDEOS = "photos_and_videos"
    SESSION_DATA = "session_data"
    CALENDAR_DATA = "calendar_data"
    HEALTH_AND_FITNESS_DATA = "health_and_fitness_data"
    CONTACTS_DATA = "contacts_data"
    MESSAGES_DATA = "messages_data"
    AUTHENTICATION = "authentication"
    EMAIL_AUTHENTICATION = "email_authentication"
    NETWORK_AUTHENTICATION = "network_authentication"
    PAYMENT_AUTHENTICATION = "payment_authentication"
    MESSAGE = "message"
    UI = "ui"
    AUDIO = "audio"
    EMAIL = "email"

    @property
    def phrase(self) -> str:
        return _CATEGORY_PHRASES[self]


_CATEGORY_PHRASES = {
    DataCategory.PERSONAL_INFORMATION: "personal information",
    DataCategory.DEVICE_OR_OTHER_IDS: "device or other IDs",
    DataCategory.FINANCIAL_INFORMATION: "financial information",
    DataCategory.LOCATION_DATA: "location",
    DataCategory.DEVICE_DATA: "device",
    DataCategory.AUDIO_DATA: "audio",
    DataCategory.BROWSING_DATA: "browsing",
    DataCategory.APP_ACTIVITY: "app activity",
    DataCategory.PHOTOS_AND_VIDEOS: "photos and videos",
    DataCategory.SESSION_DATA: "session",
    DataCategory.CALENDAR_DATA: "calendar",
    DataCategory.HEALTH_AND_FITNESS_DATA: "health and fitness",
    DataCategory.CONTACTS_DATA: "contacts",
    DataCategory.MESSAGES_DATA: "messages",
    DataCategory.AUTHENTICATION: "authentication",
    DataCategory.EMAIL_AUTHENTICATION: "email authentication",
    DataCategory.NETWORK_AUTHENTICATION: "network authentication",
    DataCategory.PAYMENT_AUTHENTICATION: "payment authentication",
    DataCategory.MESSAGE: "message",
    DataCategory.UI: "UI",
    DataCategory.AUDIO: "audio",
    DataCategory.EMAIL: "email",
}

# Rank-2 rows for health, contacts and messages extend the published table;
# they are flagged so reports can tell them apart.
EXTENSION_PAIRS = frozenset(
    {
        (RiskRank.PARTIAL, DataCategory.HEALTH_AND_FITNESS_DATA),
        (RiskRank.PARTIAL, DataCategory.CONTACTS_DATA),
        (RiskRank.PARTIAL, DataCategory.MESSAGES_DATA),
    }
)

RANK_CATEGORIES: dict[RiskRank, tuple[DataCategory, ...]] = {
    RiskRank.DIRECT: (
        DataCategory.PERSONAL_INFORMATION,
        DataCategory.DEVICE_OR_OTHER_IDS,
        DataCategory.FINANCIAL_INFORMATION,
    ),
    RiskRank.PARTIAL: (
        DataCategory.PERSONAL_INFORMATION,
        DataCategory.LOCATION_DATA,
        DataCategory.DEVICE_DATA,
        DataCategory.AUDIO_DATA,
        DataCategory.BROWSING_DATA,
        DataCategory.APP_ACTIVITY,
        DataCategory.PHOTOS_AND_VIDEOS,
        DataCategory.SESSION_DATA,
        DataCategory.CALENDAR_DATA,
        DataCategory.HEALTH_AND_FITNESS_DATA,
        DataCategory.CONTACTS_DATA,
        DataCategory.MESSAGES_DATA,
    ),
    RiskRank.ACCESS: (
        DataCategory.AUTHENTICATION,
        DataCategory.EMAIL_AUTHENTICATION,
        DataCategory.NETWORK_AUTHENTICATION,
        DataCategory.PAYMENT_AUTHENTICATION,
    ),
    RiskRank.CONTEXT: (
        DataCategory.MESSAGE,
        DataCategory.UI,
        DataCategory.AUDIO,
        DataCategory.PHOTOS_AND_VIDEOS,
        DataCategory.EMAIL,
    ),
}

ADMISSIBLE_PAIRS: frozenset[tuple[RiskRank, DataCategory]] = frozenset(
    (rank, cat) for rank, cats in RANK_CATEGORIES.items() for cat in cats
)


def is_admissible(rank: RiskRank, category: DataCategory) -> bool:
    return (rank, category) in ADMISSIBLE_PAIRS


@dataclass(frozen=True, order=True)
class PrivacyLabel:
    rank: RiskRank
    category: DataCategory

    def __post_init__(self) -> None:
        object.__setattr__(self, "rank", RiskRank(self.rank))
        object.__setattr__(self, "category", DataCategory(self.category))
        if not is_admissible(self.rank, self.category):
            raise InvalidRankCategoryPair(
                f"{self.category.value} is not a rank-{int(self.rank)} category"
            )

    @property
    def relevance(self) -> PrivacyRelevance:
        return self.rank.relevance

    @property
    def is_extension(self) -> bool:
        return (self.rank, self.category) in EXTENSION_PAIRS

    def describe(self) -> str:
        phrase = self.category.phrase
        if not (phrase.endswith("information") or phrase.endswith("IDs")):
            phrase += " data"
        return f"{_RELEVANCE_PHRASES[self.rank]} {phrase}"


_WS = re.compile(r"\s+")


@dataclass(frozen=True, order=True)
class IdentifierTag:
    """Free-form identifier from an open vocabulary, whitespace-normalized."""

    name: str

    def __post_init__(self) -> None:
        norm = _WS.sub(" ", str(self.name)).strip()
        if not norm:
            raise EmptyIdentifier("identifier is empty")
        object.__setattr__(self, "name", norm)

    def __str__(self) -> str:
        return self.name


class SafetyCategory(Enum):
    LOCATION = "location"
    PERSONAL_INFO = "personal_info"
    FINANCIAL_INFO = "financial_info"
    HEALTH_AND_FITNESS = "health_and_fitness"
    MESSAGES = "messages"
    PHOTOS_AND_VIDEOS = "photos_and_videos"
    AUDIO = "audio"
    FILES_AND_DOCS = "files_and_docs"
    CALENDAR = "calendar"
    CONTACTS = "contacts"
    APP_ACTIVITY = "app_activity"
    WEB_BROWSING = "web_browsing"
    APP_INFO_AND_PERFORMANCE = "app_info_and_performance"
    DEVICE_OR_OTHER_IDS = "device_or_other_ids"

    @property
    def display(self) -> str:
        return _SAFETY_DISPLAY[self]


_SAFETY_DISPLAY = {
    SafetyCategory.LOCATION: "Location",
    SafetyCategory.PERSONAL_INFO: "Personal info",
    SafetyCategory.FINANCIAL_INFO: "Financial info",
    SafetyCategory.HEALTH_AND_FITNESS: "Health and fitness",
    SafetyCategory.MESSAGES: "Messages",
    SafetyCategory.PHOTOS_AND_VIDEOS: "Photos and videos",
    SafetyCategory.AUDIO: "Audio",
    SafetyCategory.FILES_AND_DOCS: "Files and docs",
    SafetyCategory.CALENDAR: "Calendar",
    SafetyCategory.CONTACTS: "Contacts",
    SafetyCategory.APP_ACTIVITY: "App activity",
    SafetyCategory.WEB_BROWSING: "Web browsing",
    SafetyCategory.APP_INFO_AND_PERFORMANCE: "App info and performance",
    SafetyCategory.DEVICE_OR_OTHER_IDS: "Device or other IDs",
}

# Column order of the audited matrix (the categories static evidence can reach).
AUDITED_CATEGORIES: tuple[SafetyCategory, ...] = (
    SafetyCategory.DEVICE_OR_OTHER_IDS,
    SafetyCategory.PERSONAL_INFO,
    SafetyCategory.AUDIO,
    SafetyCategory.CONTACTS,
    SafetyCategory.LOCATION,
    SafetyCategory.PHOTOS_AND_VIDEOS,
    SafetyCategory.FINANCIAL_INFO,
    SafetyCategory.MESSAGES,
    SafetyCategory.HEALTH_AND_FITNESS,
    SafetyCategory.CALENDAR,
)


class Purpose(Enum):
    APP_FUNCTIONALITY = "app_functionality"
    ANALYTICS = "analytics"
    DEVELOPER_COMMUNICATIONS = "developer_communications"
    ADVERTISING = "advertising"
    FRAUD_PREVENTION_SECURITY_COMPLIANCE = "fraud_prevention_security_compliance"
    PERSONALIZATION = "personalization"
    ACCOUNT_MANAGEMENT = "account_management"

    @property
    def display(self) -> str:
        return _PURPOSE_DISPLAY[self]


_PURPOSE_DISPLAY = {
    Purpose.APP_FUNCTIONALITY: "App functionality",
    Purpose.ANALYTICS: "Analytics",
    Purpose.DEVELOPER_COMMUNICATIONS: "Developer communications",
    Purpose.ADVERTISING: "Advertising or marketing",
    Purpose.FRAUD_PREVENTION_SECURITY_COMPLIANCE: "Fraud prevention, security, and compliance",
    Purpose.PERSONALIZATION: "Personalization",
    Purpose.ACCOUNT_MANAGEMENT: "Account management",
}


# --- label text ------------------------------------------------------------

def _squash(text: str) -> str:
    return _WS.sub(" ", text.replace("-", " ")).strip().lower()


_PHRASE_LOOKUP = [
    (_squash(p), rank) for rank, p in _RELEVANCE_PHRASES.items()
]
# longest first so "directly identifiable" wins over any shorter prefix
_PHRASE_LOOKUP.sort(key=lambda item: -len(item[0]))


def _category_for_phrase(rank: RiskRank, phrase: str) -> DataCategory:
    candidates = [c for c in DataCategory if _squash(c.phrase) == phrase]
    if not candidates:
        raise UnknownCategory(f"unknown data category {phrase!r}")
    for cat in candidates:
        if is_admissible(rank, cat):
            return cat
    raise InvalidRankCategoryPair(f"{phrase!r} is not a rank-{int(rank)} category")


def parse_label(text: str) -> tuple[PrivacyLabel, IdentifierTag]:
    """Parse ``"<relevance> <category> -> <identifier>"``.

    Relevance and category phrases are case-insensitive; a trailing "data"
    on the category is optional. A rank-4 label may omit the category, in
    which case the identifier must name one ("Context-dependent data ->
    Message").
    """
    head, sep, ident = text.replace("→", "->").partition("->")
    if not sep:
        raise TaxonomyError(f"missing '->' in {text!r}")
    identifier = IdentifierTag(ident)
    head = _squash(head)
    for phrase, rank in _PHRASE_LOOKUP:
        if head == phrase or head.startswith(phrase + " "):
            rest = head[len(phrase):].strip()
            break
    else:
        raise UnknownRelevance(f"unknown privacy relevance in {text!r}")

    if rest in ("data", ""):
        if rank is not RiskRank.CONTEXT:
            raise UnknownCategory(f"no data category in {text!r}")
        return PrivacyLabel(rank, _category_for_phrase(rank, _squash(identifier.name))), identifier
    try:
        category = _category_for_phrase(rank, rest)
    except UnknownCategory:
        if not rest.endswith(" data"):
            raise
        category = _category_for_phrase(rank, rest[: -len(" data")])
    return PrivacyLabel(rank, category), identifier


def format_label(label: PrivacyLabel, identifier: IdentifierTag) -> str:
    return f"{label.describe()} -> {identifier.name}"


def safety_category_for(
    label: PrivacyLabel, identifier: IdentifierTag, mapping: CategoryMapping
) -> SafetyCategory | None:
    """Route a label to its data-safety category; None when the form has no home for it."""
    ident = identifier.name.lower()
    fallback: SafetyCategory | None = None
    for row in mapping.rows_for(label):
        if row.identifier_glob == "*":
            fallback = row.safety_category
        elif fnmatchcase(ident, row.identifier_glob.lower()):
            return row.safety_category
    return fallback
