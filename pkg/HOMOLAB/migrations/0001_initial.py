# Generated by Django 5.2.7 on 2026-10-17 10:12

from django.db import migrations, models
import django.db.models.deletion


class Migration(migrations.Migration):

    initial = True

    dependencies = [
    ]

    operations = [
        migrations.CreateModel(
            name='ExperimentRun',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('clt', 'Clt'), ('covariance', 'Covariance'), ('moment_fit', 'Moment fit'), ('hermite_regime', 'Hermite regime'), ('homogenize_1d', 'Homogenize 1d'), ('homogenize_nd', 'Homogenize nd'), ('decomp_residual', 'Decomp residual'), ('mixing', 'Mixing')], max_length=30, verbose_name='Tipo de experimento')),
                ('seed', models.BigIntegerField(verbose_name='Semilla')),
                ('config', models.JSONField(verbose_name='Configuración')),
                ('config_hash', models.CharField(db_index=True, max_length=64)),
                ('status', models.CharField(choices=[('en_curso', 'En curso'), ('completado', 'Completado'), ('fallido', 'Fallido')], default='en_curso', max_length=20, verbose_name='Estado')),
                ('passed', models.BooleanField(blank=True, null=True, verbose_name='Veredictos aprobados')),
                ('report', models.JSONField(blank=True, null=True)),
                ('error', models.TextField(blank=True, default='')),
                ('output_dir', models.CharField(blank=True, default='', max_length=500)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('updated_at', models.DateTimeField(auto_now=True)),
            ],
            options={
                'db_table': 'experiment_runs',
                'ordering': ['-created_at'],
            },
        ),
        migrations.CreateModel(
            name='Artifact',
            fields=[
                ('id', models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name='ID')),
                ('kind', models.CharField(choices=[('report', 'Reporte JSON'), ('table', 'Tabla CSV'), ('plot_data', 'Datos para gráficos'), ('ensemble', 'Contenedor de ensamble'), ('lift', 'Contenedor de lift'), ('solution', 'Contenedor de solución')], max_length=20)),
                ('path', models.CharField(max_length=500)),
                ('size', models.PositiveBigIntegerField(default=0)),
                ('created_at', models.DateTimeField(auto_now_add=True)),
                ('run', models.ForeignKey(on_delete=django.db.models.deletion.CASCADE, related_name='artifacts', to='HOMOLAB.experimentrun')),
            ],
            options={
                'db_table': 'artifacts',
                'ordering': ['run', 'path'],
            },
        ),
    ]
