"""TrustWebRank."""
