import json

import pytest
import yaml

from snaprg.config import ConfigError, load_config, parse_config
from snaprg.mcmc import BETA_C_2D, T_C_3D


def base(**sections):
    doc = {"lattice": {"dimension": 2, "lengths": [8, 8]},
           "sampler": {"beta": 0.3, "n_snapshots": 100}}
    for k, v in sections.items():
        doc.setdefault(k, {}).update(v)
    return doc


def test_defaults():
    cfg = parse_config(base())
    assert cfg.sampler.beta == 0.3
    assert cfg.sampler.n_decor == 10
    assert cfg.sampler.mix == 0.5
    assert cfg.n_rg_steps == 0
    assert cfg.bin_ratio == 1.3
    assert cfg.window is None
    assert cfg.eta == 0.25


@pytest.mark.parametrize("temp, beta", [({"T": 2.0}, 0.5),
                                        ({"T_over_Tc": 1.0}, BETA_C_2D),
                                        ({"T_over_Tc": 1.1}, BETA_C_2D / 1.1)])
def test_temperature_forms(temp, beta):
    doc = base()
    del doc["sampler"]["beta"]
    doc["sampler"].update(temp)
    assert parse_config(doc).sampler.beta == pytest.approx(beta)


def test_3d_reference_temperature():
    doc = base(lattice={"dimension": 3, "lengths": [4, 4, 4]})
    del doc["sampler"]["beta"]
    doc["sampler"]["T_over_Tc"] = 1.0
    assert parse_config(doc).sampler.beta == pytest.approx(1 / T_C_3D)


def test_field_model_defaults_to_metropolis():
    cfg = parse_config(base(model={"perturbation": "field"}))
    assert cfg.sampler.mix == 0.0
    assert cfg.model.h == pytest.approx(0.01)


@pytest.mark.parametrize("doc, path", [
    (base(sampler={"mix": 2}), "sampler.mix"),
    (base(sampler={"T": 2.0}), "sampler"),
    (base(bogus={"a": 1}), "bogus"),
    (base(sampler={"colour": 1}), "sampler.colour"),
    (base(lattice={"lengths": [5, 8]}), "lattice"),
    (base(rg={"n_steps": 40}), "rg.n_steps"),
    (base(wfn={"bin_ratio": 1.0}), "wfn.bin_ratio"),
    (base(fit={"window": "wide"}), "fit.window"),
    (base(model={"perturbation": "field"}, sampler={"mix": 0.5}), "sampler.mix"),
    (base(sampler={"n_snapshots": "many"}), "sampler.n_snapshots"),
    ({"sampler": {"beta": 0.3, "n_snapshots": 10}}, "lattice"),
])
def test_invalid_configs_name_field(doc, path):
    with pytest.raises(ConfigError, match=path.replace(".", r"\.")):
        parse_config(doc)


def test_nnn_rejects_relative_temperature():
    doc = base(model={"perturbation": "nnn"})
    del doc["sampler"]["beta"]
    doc["sampler"]["T_over_Tc"] = 1.0
    with pytest.raises(ConfigError):
        parse_config(doc)


def test_load_yaml_and_json(tmp_path):
    doc = base(rg={"n_steps": 2}, fit={"window": [2, 50]})
    (tmp_path / "c.yaml").write_text(yaml.safe_dump(doc))
    (tmp_path / "c.json").write_text(json.dumps(doc))
    a, b = load_config(tmp_path / "c.yaml"), load_config(tmp_path / "c.json")
    assert a.n_rg_steps == b.n_rg_steps == 2
    assert a.window == b.window == (2, 50)


def test_load_malformed(tmp_path):
    (tmp_path / "c.yaml").write_text("lattice: [unclosed\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "c.yaml")
    (tmp_path / "d.yaml").write_text("- just\n- a list\n")
    with pytest.raises(ConfigError):
        load_config(tmp_path / "d.yaml")
