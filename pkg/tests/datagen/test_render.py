from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from fanet.datagen.render import IdentityBank, render_sample
from fanet.exceptions import IdentityLookupError, InputValidationError


@pytest.fixture(scope="module")
def bank() -> IdentityBank:
    return IdentityBank(n_identities=5, side=32, seed=1234)


def render(bank: IdentityBank, identity: int = 0, **factors):
    defaults = {"pose": 0.0, "illumination": 1.0, "occlusion": False, "rng_seed": 7}
    return render_sample(bank, identity, **{**defaults, **factors})


def test_rendering_is_deterministic(bank):
    np.testing.assert_array_equal(render(bank).image.pixels, render(bank).image.pixels)


def test_rendering_depends_only_on_arguments(bank):
    fresh = IdentityBank(n_identities=5, side=32, seed=1234)

    np.testing.assert_array_equal(render(bank, 3).image.pixels, render(fresh, 3).image.pixels)


def test_concurrent_lookups_draw_each_template_once(monkeypatch):
    shared = IdentityBank(n_identities=5, side=32, seed=1234)
    draws = []
    draw = shared._draw

    def counting_draw(identity_id):
        draws.append(identity_id)
        return draw(identity_id)

    monkeypatch.setattr(shared, "_draw", counting_draw)
    identities = [index % 5 for index in range(200)]

    with ThreadPoolExecutor(max_workers=8) as pool:
        templates = list(pool.map(shared.template, identities))

    assert sorted(draws) == [0, 1, 2, 3, 4]
    for identity, template in zip(identities, templates, strict=True):
        assert template is templates[identity]


def test_pose_changes_the_image_not_the_identity(bank):
    frontal = render(bank, pose=0.0)
    turned = render(bank, pose=30.0)

    assert frontal.identity_id == turned.identity_id == 0
    assert not np.array_equal(frontal.image.pixels, turned.image.pixels)


def test_identities_have_distinct_templates(bank):
    assert not np.array_equal(bank.template(0), bank.template(1))


def test_samples_of_one_identity_share_the_template(bank):
    dim = render(bank, illumination=0.6, rng_seed=1)
    bright = render(bank, illumination=1.4, rng_seed=2)
    other = render(bank, 1, illumination=1.4, rng_seed=2)

    def correlation(a, b):
        return np.corrcoef(a.image.pixels.ravel(), b.image.pixels.ravel())[0, 1]

    assert correlation(dim, bright) > correlation(other, bright)


@pytest.mark.parametrize(
    "factors",
    [
        {"pose": -45.0, "illumination": 0.5, "occlusion": True},
        {"pose": 45.0, "illumination": 1.5, "occlusion": True},
        {"pose": 10.0, "illumination": 1.0, "occlusion": False},
    ],
)
def test_pixels_stay_in_range(bank, factors):
    pixels = render(bank, 2, **factors).image.pixels

    assert pixels.min() >= -1.0
    assert pixels.max() <= 1.0
    assert pixels.shape == (32, 32, 1)


def test_occlusion_changes_the_image(bank):
    plain = render(bank, occlusion=False)
    occluded = render(bank, occlusion=True)

    assert not np.array_equal(plain.image.pixels, occluded.image.pixels)


@pytest.mark.parametrize("identity", [-1, 5, 100])
def test_unknown_identity_is_a_lookup_error(bank, identity):
    with pytest.raises(IdentityLookupError):
        render(bank, identity)


@pytest.mark.parametrize(
    "factors", [{"pose": 46.0}, {"pose": -60.0}, {"illumination": 0.4}, {"illumination": 2.0}]
)
def test_out_of_range_factor_is_a_validation_error(bank, factors):
    with pytest.raises(InputValidationError):
        render(bank, **factors)


def test_identity_lookup_error_is_a_lookup_error():
    assert issubclass(IdentityLookupError, LookupError)
