import pnsim


def test_public_names_resolve():
    for name in pnsim.__all__:
        assert getattr(pnsim, name) is not None


def test_version_string():
    assert pnsim.__version__.count(".") == 2
