"""Drive an attack over HTTP against the bundled synthetic scoring service.

The same landscape that backs in-process runs is exposed through the wire
protocol (POST /score with a base64 PNG, GET /labels), and the attack client
only ever sees pixels and probabilities: each query renders the sticker onto
the face, ships the image, and the service recovers the placement from the
changed pixels before scoring. Query accounting and caching behave exactly
as in process.
"""

import argparse
import threading

from advsticker import (
    AttackContext,
    Objective,
    ParamBounds,
    RemoteOracle,
    SearchConfig,
    run,
)
from advsticker.server import build_scorer, make_server


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--seed", type=int, default=1)
    parser.add_argument("--budget", type=int, default=400)
    args = parser.parse_args()

    scorer = build_scorer(seed=args.seed, size=48, n_bumps=2,
                          amplitude_range=(4.5, 5.5), phase_range=(0.0, 0.0))
    server = make_server(scorer)
    threading.Thread(target=server.serve_forever, daemon=True).start()
    url = f"http://{server.server_address[0]}:{server.server_address[1]}"
    print(f"synthetic scoring service listening at {url}")

    oracle = RemoteOracle(url, budget=args.budget)
    print(f"gallery over the wire: {', '.join(oracle.labels())}")

    ctx = AttackContext(oracle=oracle, index=scorer.index,
                        bounds=ParamBounds.for_index(scorer.index, angle=(0.0, 0.0)),
                        face=scorer.face, sticker=scorer.sticker,
                        surface=scorer.surface)
    config = SearchConfig(population_size=10, generations=12, seed=args.seed)
    result = run(config, Objective("dodging", scorer.landscape.ground_truth), ctx)

    verdict = "fooled" if result.success else "not fooled"
    print(f"{verdict} after {result.nq} HTTP queries (trigger: {result.trigger})")
    if result.image is not None:
        print(f"adversarial render: {result.image.shape[0]}x{result.image.shape[1]} px")
    server.shutdown()


if __name__ == "__main__":
    main()
