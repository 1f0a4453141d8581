import os

import pytest

AppTest = pytest.importorskip("streamlit.testing.v1").AppTest


def test_app_renders(root_dir):
    app = AppTest.from_file(os.path.join(root_dir, "app.py"), default_timeout=30).run()
    assert not app.exception
    assert app.title
