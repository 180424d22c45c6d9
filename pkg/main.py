"""
Merge tree Wasserstein toolkit.
Command line for distances, geodesics, barycenters and ensemble analysis of merge trees.
"""

from app.cli.runner import main

if __name__ == "__main__":
    main()
