"""Quick end-to-end check of the pytensegrity extension."""

import json

import pytensegrity as pt


def main():
    module = json.loads(pt.canonical_module_json())
    assert len(module["nodes"]) == 12
    assert len(module["struts"]) == 6
    assert len(module["faces"]) == 8

    g = pt.Genome.random(7)
    assert len(g.bits()) == pt.Genome.BITS
    assert pt.Genome(g.to_hex()) == g
    assert pt.Genome.from_bits(g.bits()) == g
    decoded = g.decode()
    assert len(decoded["modules"]) == g.module_count()
    assert decoded["modules"][0]["parent"] is None

    pose = pt.settled_pose(g, "HIGH", settle_duration=0.5)
    assert len(pose) == 12 * g.module_count()
    assert min(z for _, _, z in pose) > -0.01

    a = pt.simulate(g, "LOW", duration=2.0, settle_duration=0.5)
    b = pt.simulate(g, "LOW", duration=2.0, settle_duration=0.5)
    assert a.fitness == b.fitness >= 0.0
    assert len(a.times) == len(a.com) == 201
    print(a)

    evo = pt.evolve("HIGH", seed=3, population_size=4, generations=2,
                    sim_duration=1.0, settle_duration=0.5)
    bests = [h[1] for h in evo.history]
    assert bests == sorted(bests)
    assert evo.best_fitness == bests[-1]
    print("evolve best", evo.best_fitness, "modules", evo.best_module_count)

    cfg = json.loads(pt.normalize_config('{"schema_version": 1, "run_count": 2}'))
    assert cfg["run_count"] == 2
    try:
        pt.normalize_config('{"schema_version": 1, "nope": 1}')
    except ValueError as e:
        assert "nope" in str(e)
    else:
        raise AssertionError("unknown key accepted")
    try:
        pt.Genome("zz")
    except ValueError:
        pass
    else:
        raise AssertionError("bad hex accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
