"""Product-matching dataset toolkit: distant-supervision pair building,
cross-lingual training mixes, a co-occurrence baseline matcher, and the
language-mix experiment grid."""

__version__ = "0.1.0"
