"""Downstream evaluation: retrieval rescue, statistics, link prediction, clustering, evidence age."""
